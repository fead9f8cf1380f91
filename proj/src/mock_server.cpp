#include "toolforge/mock_server.hpp"

#include "toolforge/builtins.hpp"
#include "toolforge/errors.hpp"
#include "toolforge/http_client.hpp"

#include "httplib.h"

#include <atomic>
#include <thread>

namespace toolforge {

std::string_view to_string(MockKind kind) {
    switch (kind) {
        case MockKind::EchoModel: return "echo_model";
        case MockKind::ScriptedJudge: return "scripted_judge";
        case MockKind::SlowTool: return "slow_tool";
    }
    return "?";
}

MockKind mock_kind_from_string(std::string_view name) {
    if (name == "echo_model") return MockKind::EchoModel;
    if (name == "scripted_judge") return MockKind::ScriptedJudge;
    if (name == "slow_tool") return MockKind::SlowTool;
    throw ConfigParseError("unknown mock kind '" + std::string(name) + "' (expected echo_model|scripted_judge|slow_tool)");
}

std::string scripted_judge_reply(double score) {
    return "The final answer was compared with the reference answer and the tool results.\n"
           "The reasoning is consistent with the retrieved evidence.\n"
           "SCORE: " + format_number(score);
}

struct MockServer::Impl {
    MockKind kind;
    MockOptions options;
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<std::size_t> served{0};
};

MockServer::MockServer(MockKind kind, int port, MockOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->kind = kind;
    impl_->options = std::move(options);
    const std::size_t threads = impl_->options.threads;
    impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    // httplib also sets SO_REUSEPORT, which lets a second server share a taken port.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });

    Impl* impl = impl_.get();
    impl_->server.Post(".*", [impl](const httplib::Request& req, httplib::Response& res) {
        ++impl->served;
        if (impl->options.delay.count() > 0) std::this_thread::sleep_for(impl->options.delay);
        switch (impl->kind) {
            case MockKind::SlowTool:
                res.set_content(impl->options.tool_body, "text/plain");
                return;
            case MockKind::EchoModel: {
                nlohmann::json body;
                try {
                    body = nlohmann::json::parse(req.body);
                } catch (const nlohmann::json::parse_error&) {
                    res.status = 400;
                    res.set_content("request body is not JSON", "text/plain");
                    return;
                }
                const auto prompt = http::last_user_message(body);
                if (!prompt) {
                    res.status = 400;
                    res.set_content("no user message", "text/plain");
                    return;
                }
                res.set_content(http::chat_response(*prompt, "echo_model").dump(), "application/json");
                return;
            }
            case MockKind::ScriptedJudge: {
                const std::string reply = impl->options.reply.value_or(scripted_judge_reply(impl->options.score));
                res.set_content(http::chat_response(reply, "scripted_judge").dump(), "application/json");
                return;
            }
        }
    });

    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
        if (impl_->port <= 0) throw MockBindError("mock server: could not bind any port on " + impl_->options.host);
    } else {
        if (!impl_->server.bind_to_port(impl_->options.host, port)) {
            throw MockBindError("mock server: could not bind port " + std::to_string(port));
        }
        impl_->port = port;
    }
    impl_->thread = std::thread([impl] { impl->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

int MockServer::port() const { return impl_->port; }

std::string MockServer::url(std::string_view path) const {
    return "http://" + impl_->options.host + ":" + std::to_string(impl_->port) + std::string(path);
}

std::size_t MockServer::requests_served() const { return impl_->served.load(); }

void MockServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::wait() const {
    while (impl_->server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

}  // namespace toolforge
