#pragma once

#include "toolforge/call_parser.hpp"
#include "toolforge/tool_registry.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace toolforge {

enum class InvocationStatus { Ok, Timeout, ToolError, TransportError, ValidationError };

std::string_view to_string(InvocationStatus status);

struct InvocationResult {
    ToolCall call;
    InvocationStatus status = InvocationStatus::Ok;
    /// Response body when Ok, otherwise a human-readable reason.
    std::string payload;
    std::int64_t latency_ms = 0;

    bool ok() const { return status == InvocationStatus::Ok; }
};

class Corpus;

/// Runs tool calls against a registry. Every call of a round runs on its own
/// worker with its own deadline; a slow or failing call never holds up the
/// others.
///
/// The invoker is immutable after construction and can be shared by any
/// number of episode workers.
class Invoker {
public:
    /// Loads the corpora referenced by builtin tools. Throws ConfigParseError
    /// when a corpus file cannot be read.
    explicit Invoker(std::shared_ptr<const Registry> registry);
    ~Invoker();

    Invoker(const Invoker&) = delete;
    Invoker& operator=(const Invoker&) = delete;

    const Registry& registry() const { return *registry_; }

    /// Results align 1:1 with `calls`. Unknown tools and argument errors come
    /// back as ValidationError; the round always completes.
    std::vector<InvocationResult> invoke_round(const std::vector<ToolCall>& calls) const;

    /// One call including validation, per-attempt timeout and retries.
    InvocationResult invoke_one(const ToolCall& call) const;

    /// Builtin program tools. `args` must already be validated.
    InvocationResult execute_builtin(const ToolSpec& spec, const Arguments& args) const;
    /// Chat-completion call sending `args.prompt`.
    InvocationResult execute_model_tool(const ToolSpec& spec, const Arguments& args) const;
    /// POST of `{tool, arguments}`; the response body is the payload.
    InvocationResult execute_http_tool(const ToolSpec& spec, const Arguments& args) const;
    /// Runs member tools in order, feeding each payload to the next tool's
    /// first parameter.
    InvocationResult execute_agent(const ToolSpec& spec, const Arguments& args) const;

    /// Dispatch by kind and endpoint, without timeout handling.
    InvocationResult execute(const ToolSpec& spec, const Arguments& args) const;

    /// Registry and corpora kept alive by in-flight workers.
    struct Shared;

private:
    std::shared_ptr<const Shared> shared_;
    std::shared_ptr<const Registry> registry_;
};

}  // namespace toolforge
