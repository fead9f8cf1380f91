#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace toolforge {

enum class MockKind { EchoModel, ScriptedJudge, SlowTool };

std::string_view to_string(MockKind kind);
/// Throws ConfigParseError for names other than echo_model, scripted_judge, slow_tool.
MockKind mock_kind_from_string(std::string_view name);

struct MockOptions {
    /// scripted_judge: score written on the final `SCORE:` line.
    double score = 1.0;
    /// scripted_judge: full reply text, replacing the canned reasoning.
    std::optional<std::string> reply;
    /// Sleep before answering (all kinds; slow_tool's whole point).
    std::chrono::milliseconds delay{0};
    /// slow_tool: response body.
    std::string tool_body = "ok";
    std::string host = "127.0.0.1";
    std::size_t threads = 64;
};

/// Test double served over HTTP on a background thread. Every POST path is
/// accepted:
///   - echo_model answers chat completions with the last user message;
///   - scripted_judge answers chat completions with canned reasoning ending
///     in `SCORE: <score>` (or the configured reply);
///   - slow_tool sleeps `delay`, then returns `tool_body` as plain text.
/// Stops on destruction.
class MockServer {
public:
    /// Port 0 picks a free port. Throws MockBindError naming the port.
    MockServer(MockKind kind, int port, MockOptions options = {});
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const;
    /// `http://host:port` plus `path`.
    std::string url(std::string_view path = "/v1/chat/completions") const;
    std::size_t requests_served() const;

    void stop();
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Canned judge reply for `score`.
std::string scripted_judge_reply(double score);

}  // namespace toolforge
