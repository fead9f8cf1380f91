#include "toolforge/invoker.hpp"

#include "toolforge/builtins.hpp"
#include "toolforge/errors.hpp"
#include "toolforge/http_client.hpp"

#include <chrono>
#include <future>
#include <thread>

namespace toolforge {

std::string_view to_string(InvocationStatus status) {
    switch (status) {
        case InvocationStatus::Ok: return "ok";
        case InvocationStatus::Timeout: return "timeout";
        case InvocationStatus::ToolError: return "tool_error";
        case InvocationStatus::TransportError: return "transport_error";
        case InvocationStatus::ValidationError: return "validation_error";
    }
    return "?";
}

struct Invoker::Shared {
    std::shared_ptr<const Registry> registry;
    std::map<std::string, std::shared_ptr<const Corpus>> corpora;  // by resolved path
};

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ms(Clock::time_point since) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - since).count();
}

InvocationResult make_result(InvocationStatus status, std::string payload) {
    InvocationResult r;
    r.status = status;
    r.payload = std::move(payload);
    return r;
}

// Value of `preferred`, else the first string argument.
std::optional<std::string> string_arg(const Arguments& args, const char* preferred) {
    if (args.contains(preferred) && args.at(preferred).is_string()) return args.at(preferred).get<std::string>();
    for (const auto& [key, value] : args.items()) {
        if (value.is_string()) return value.get<std::string>();
    }
    return std::nullopt;
}

std::int64_t int_setting(const Arguments& args, const nlohmann::json& options, const char* key, std::int64_t fallback) {
    if (args.contains(key) && args.at(key).is_number()) return args.at(key).get<std::int64_t>();
    if (options.contains(key) && options.at(key).is_number()) return options.at(key).get<std::int64_t>();
    return fallback;
}

std::string corpus_path(const ToolSpec& spec) {
    if (spec.options.contains("corpus") && spec.options.at("corpus").is_string()) {
        return spec.options.at("corpus").get<std::string>();
    }
    return {};
}

InvocationResult run_builtin(const Invoker::Shared& shared, const ToolSpec& spec, const Arguments& args);
InvocationResult run_spec(const Invoker::Shared& shared, const ToolSpec& spec, const Arguments& args);

InvocationResult run_http(const ToolSpec& spec, const Arguments& args) {
    const nlohmann::json body = {{"tool", spec.name}, {"arguments", args}};
    const auto resp = http::post_json(spec.endpoint, body, std::chrono::milliseconds(spec.timeout_ms));
    if (resp.transport_error) {
        if (resp.timed_out) return make_result(InvocationStatus::Timeout, "timed out after " + std::to_string(spec.timeout_ms) + " ms");
        return make_result(InvocationStatus::TransportError, *resp.transport_error);
    }
    if (!resp.success()) return make_result(InvocationStatus::TransportError, "http status " + std::to_string(resp.status));
    return make_result(InvocationStatus::Ok, resp.body);
}

InvocationResult run_model(const ToolSpec& spec, const Arguments& args) {
    const auto prompt = string_arg(args, "prompt");
    if (!prompt) return make_result(InvocationStatus::ToolError, "model tool needs a string prompt");
    const std::string model = spec.options.value("model", std::string("default"));
    const auto request = http::chat_request(model, nlohmann::json::array({{{"role", "user"}, {"content", *prompt}}}));
    const auto resp = http::post_json(spec.endpoint, request, std::chrono::milliseconds(spec.timeout_ms));
    if (resp.transport_error) {
        if (resp.timed_out) return make_result(InvocationStatus::Timeout, "timed out after " + std::to_string(spec.timeout_ms) + " ms");
        return make_result(InvocationStatus::TransportError, *resp.transport_error);
    }
    if (!resp.success()) return make_result(InvocationStatus::TransportError, "http status " + std::to_string(resp.status));
    auto content = http::chat_content(resp.body);
    if (!content) return make_result(InvocationStatus::ToolError, "unparseable response");
    return make_result(InvocationStatus::Ok, std::move(*content));
}

InvocationResult run_agent(const Invoker::Shared& shared, const ToolSpec& spec, const Arguments& args) {
    Arguments current = args;
    InvocationResult last = make_result(InvocationStatus::ToolError, "agent has no members");
    bool first = true;
    for (const auto& member_name : spec.agent_members()) {
        const ToolSpec* member = shared.registry ? shared.registry->find(member_name) : nullptr;
        if (!member) {
            return make_result(InvocationStatus::ValidationError,
                               "agent '" + spec.name + "': unknown member '" + member_name + "'");
        }
        if (!first) {
            if (member->params.empty()) {
                return make_result(InvocationStatus::ValidationError,
                                   "agent '" + spec.name + "': member '" + member_name + "' takes no parameters");
            }
            current = {{member->params.front().name, last.payload}};
        }
        Arguments validated;
        try {
            validated = validate_arguments(*member, current);
        } catch (const Error& e) {
            return make_result(InvocationStatus::ValidationError, "agent '" + spec.name + "': " + e.what());
        }
        last = run_spec(shared, *member, validated);
        if (!last.ok()) {
            last.payload = "agent '" + spec.name + "': member '" + member_name + "' failed: " + last.payload;
            return last;
        }
        first = false;
    }
    return last;
}

InvocationResult run_builtin(const Invoker::Shared& shared, const ToolSpec& spec, const Arguments& args) {
    const std::string name = spec.builtin_name();
    if (name == "calculator") {
        const auto expr = string_arg(args, "expr");
        if (!expr) return make_result(InvocationStatus::ToolError, "calculator needs a string expression");
        const auto result = evaluate_expression(*expr);
        if (!result.value) return make_result(InvocationStatus::ToolError, result.error);
        return make_result(InvocationStatus::Ok, format_number(*result.value));
    }
    if (name == "corpus_search") {
        const auto query = string_arg(args, "query");
        if (!query) return make_result(InvocationStatus::ToolError, "corpus_search needs a string query");
        const std::string path = corpus_path(spec);
        std::shared_ptr<const Corpus> corpus;
        if (auto it = shared.corpora.find(path); it != shared.corpora.end()) {
            corpus = it->second;
        } else {
            try {
                corpus = std::make_shared<const Corpus>(Corpus::load(path));
            } catch (const Error& e) {
                return make_result(InvocationStatus::ToolError, e.what());
            }
        }
        const auto k = int_setting(args, spec.options, "top_k", 3);
        if (k <= 0) return make_result(InvocationStatus::ToolError, "top_k must be positive");
        return make_result(InvocationStatus::Ok, format_search_results(corpus->search(*query, static_cast<std::size_t>(k))));
    }
    if (name == "echo") {
        const auto delay = int_setting(args, spec.options, "delay_ms", 0);
        if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        if (args.contains("text") && args.at("text").is_string()) return make_result(InvocationStatus::Ok, args.at("text").get<std::string>());
        return make_result(InvocationStatus::Ok, args.dump());
    }
    return make_result(InvocationStatus::ToolError, "unknown builtin '" + name + "'");
}

InvocationResult run_spec(const Invoker::Shared& shared, const ToolSpec& spec, const Arguments& args) {
    const auto start = Clock::now();
    InvocationResult r;
    switch (spec.kind) {
        case ToolKind::Program:
            r = spec.is_builtin() ? run_builtin(shared, spec, args) : run_http(spec, args);
            break;
        case ToolKind::Model:
            r = run_model(spec, args);
            break;
        case ToolKind::Agent:
            r = run_agent(shared, spec, args);
            break;
    }
    r.latency_ms = elapsed_ms(start);
    return r;
}

// Runs one attempt on a detached worker so the caller can stop waiting at the
// deadline. The worker keeps `shared` alive until it finishes.
InvocationResult run_with_deadline(std::shared_ptr<const Invoker::Shared> shared, const ToolSpec& spec,
                                   const Arguments& args) {
    auto promise = std::make_shared<std::promise<InvocationResult>>();
    auto future = promise->get_future();
    std::thread([shared, spec, args, promise] {
        try {
            promise->set_value(run_spec(*shared, spec, args));
        } catch (const std::exception& e) {
            promise->set_value(make_result(InvocationStatus::ToolError, e.what()));
        }
    }).detach();
    if (future.wait_for(std::chrono::milliseconds(spec.timeout_ms)) == std::future_status::ready) return future.get();
    return make_result(InvocationStatus::Timeout, "timed out after " + std::to_string(spec.timeout_ms) + " ms");
}

bool retryable(InvocationStatus s) { return s == InvocationStatus::Timeout || s == InvocationStatus::TransportError; }

}  // namespace

Invoker::Invoker(std::shared_ptr<const Registry> registry) : registry_(std::move(registry)) {
    auto shared = std::make_shared<Shared>();
    shared->registry = registry_;
    for (const auto& spec : registry_->tools()) {
        if (spec.builtin_name() != "corpus_search") continue;
        const std::string path = corpus_path(spec);
        if (!shared->corpora.count(path)) shared->corpora.emplace(path, std::make_shared<const Corpus>(Corpus::load(path)));
    }
    shared_ = std::move(shared);
}

Invoker::~Invoker() = default;

InvocationResult Invoker::invoke_one(const ToolCall& call) const {
    const auto start = Clock::now();
    auto finish = [&](InvocationResult r) {
        r.call = call;
        r.latency_ms = elapsed_ms(start);
        return r;
    };

    const ToolSpec* spec = registry_->find(call.tool_name);
    if (!spec) return finish(make_result(InvocationStatus::ValidationError, "unknown tool '" + call.tool_name + "'"));
    Arguments args;
    try {
        args = validate_arguments(*spec, call.arguments);
    } catch (const Error& e) {
        return finish(make_result(InvocationStatus::ValidationError, e.what()));
    }

    InvocationResult r;
    for (int attempt = 0; attempt <= spec->retries; ++attempt) {
        r = run_with_deadline(shared_, *spec, args);
        if (!retryable(r.status)) break;
    }
    return finish(std::move(r));
}

std::vector<InvocationResult> Invoker::invoke_round(const std::vector<ToolCall>& calls) const {
    std::vector<std::future<InvocationResult>> pending;
    pending.reserve(calls.size());
    for (const auto& call : calls) {
        pending.push_back(std::async(std::launch::async, [this, &call] { return invoke_one(call); }));
    }
    std::vector<InvocationResult> results;
    results.reserve(calls.size());
    for (auto& f : pending) results.push_back(f.get());
    return results;
}

namespace {
template <class F>
InvocationResult timed(F&& fn) {
    const auto start = Clock::now();
    InvocationResult r = fn();
    r.latency_ms = elapsed_ms(start);
    return r;
}
}  // namespace

InvocationResult Invoker::execute_builtin(const ToolSpec& spec, const Arguments& args) const {
    if (spec.kind != ToolKind::Program || !spec.is_builtin()) {
        return make_result(InvocationStatus::ValidationError, "tool '" + spec.name + "' is not a builtin program tool");
    }
    return timed([&] { return run_builtin(*shared_, spec, args); });
}

InvocationResult Invoker::execute_model_tool(const ToolSpec& spec, const Arguments& args) const {
    if (spec.kind != ToolKind::Model) {
        return make_result(InvocationStatus::ValidationError, "tool '" + spec.name + "' is not a model tool");
    }
    return timed([&] { return run_model(spec, args); });
}

InvocationResult Invoker::execute_http_tool(const ToolSpec& spec, const Arguments& args) const {
    if (!spec.is_http()) {
        return make_result(InvocationStatus::ValidationError, "tool '" + spec.name + "' has no http endpoint");
    }
    return timed([&] { return run_http(spec, args); });
}

InvocationResult Invoker::execute_agent(const ToolSpec& spec, const Arguments& args) const {
    if (spec.kind != ToolKind::Agent) {
        return make_result(InvocationStatus::ValidationError, "tool '" + spec.name + "' is not an agent tool");
    }
    return timed([&] { return run_agent(*shared_, spec, args); });
}

InvocationResult Invoker::execute(const ToolSpec& spec, const Arguments& args) const {
    return run_spec(*shared_, spec, args);
}

}  // namespace toolforge
