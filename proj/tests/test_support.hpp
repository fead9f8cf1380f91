#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include "toolforge/call_parser.hpp"
#include "toolforge/generator.hpp"
#include "toolforge/invoker.hpp"
#include "toolforge/tool_registry.hpp"
#include "toolforge/trajectory.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace toolforge::testing {

inline std::filesystem::path data_dir() { return TOOLFORGE_DATA_DIR; }
inline std::filesystem::path golden_dir() { return TOOLFORGE_GOLDEN_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("toolforge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline double ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

// ---- oracles ----------------------------------------------------------------

/// Token-walk oracle for loss masks: splits each span with an istringstream
/// (independent of the engine's tokenizer) and labels every token by its span.
inline std::vector<std::uint8_t> span_walk_mask(const Trajectory& traj) {
    std::vector<std::uint8_t> flags;
    for (const Span& span : traj.spans) {
        std::istringstream words(span.text);
        std::string w;
        while (words >> w) flags.push_back(span.kind == SegmentKind::ModelText ? 1 : 0);
    }
    return flags;
}

// ---- generators ------------------------------------------------------------

/// Builds random valid trajectories through append_span.
inline Trajectory random_trajectory(std::mt19937_64& rng) {
    static const std::vector<std::string> words = {"alpha", "beta", "gamma", "tool", "<tool_call>", "x", "42",
                                                   "paris", "{\"a\":1}", "Answer:", "\n", "  ", "\t"};
    auto text = [&] {
        std::uniform_int_distribution<int> len(0, 12);
        std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
        std::string out;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            if (i) out += (rng() % 3 == 0) ? "\n" : " ";
            out += words[pick(rng)];
        }
        return out;
    };
    Trajectory traj;
    traj.task_id = "rand";
    traj = append_span(traj, SegmentKind::Prompt, text(), 0);
    std::uniform_int_distribution<int> turns(0, 10);
    std::uniform_int_distribution<int> obs(0, 3);
    const int n = turns(rng);
    for (int t = 0; t < n; ++t) {
        traj = append_span(traj, SegmentKind::ModelText, text(), static_cast<std::size_t>(t));
        const int k = obs(rng);
        for (int o = 0; o < k; ++o) traj = append_span(traj, SegmentKind::Observation, text(), static_cast<std::size_t>(t));
    }
    return traj;
}

/// Random JSON value usable as an argument of the given type.
inline nlohmann::json random_value(std::mt19937_64& rng, ValueType type) {
    static const std::vector<std::string> pieces = {"a", "Z", " ", "\"", "\\", "\n", "<tool_call>", "</tool_call>",
                                                    "{", "}", "é", "\t", "<", ">", "&", "null", "0"};
    auto str = [&] {
        std::string s;
        const int n = static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
        return s;
    };
    switch (type) {
        case ValueType::String: return str();
        case ValueType::Number: {
            if (rng() % 2) return static_cast<std::int64_t>(rng() % 2000001) - 1000000;
            std::uniform_real_distribution<double> d(-1e6, 1e6);
            return d(rng);
        }
        case ValueType::Boolean: return rng() % 2 == 0;
        case ValueType::Array: {
            nlohmann::json arr = nlohmann::json::array();
            const int n = static_cast<int>(rng() % 4);
            for (int i = 0; i < n; ++i) arr.push_back(str());
            return arr;
        }
    }
    return nullptr;
}

/// Random call over a registered spec, with only known parameters.
inline ToolCall random_call(std::mt19937_64& rng, const Registry& registry) {
    const auto& spec = registry.tools()[rng() % registry.size()];
    ToolCall call;
    call.tool_name = spec.name;
    call.arguments = nlohmann::json::object();
    for (const auto& p : spec.params) {
        if (p.required || rng() % 2) call.arguments[p.name] = random_value(rng, p.value_type);
    }
    return call;
}

/// Registry with one tool of every value type, used by parser properties.
inline Registry mixed_registry() {
    Registry reg;
    ToolSpec search{"search", ToolKind::Program, {{"query", ValueType::String, true, std::nullopt},
                                                 {"top_k", ValueType::Number, false, nlohmann::json(5)}},
                    "http://127.0.0.1:9/search", 1000, 0, "search", nlohmann::json::object()};
    ToolSpec flags{"flags", ToolKind::Program, {{"on", ValueType::Boolean, true, std::nullopt},
                                               {"items", ValueType::Array, false, std::nullopt},
                                               {"note", ValueType::String, false, nlohmann::json("n/a")}},
                   "http://127.0.0.1:9/flags", 1000, 0, "flags", nlohmann::json::object()};
    ToolSpec calc{"calculator", ToolKind::Program, {{"expr", ValueType::String, true, std::nullopt}},
                  "builtin:calculator", 1000, 0, "calc", nlohmann::json::object()};
    reg.add(search);
    reg.add(flags);
    reg.add(calc);
    return reg;
}

/// Builtin-only registry: corpus search over the fixture corpus, calculator,
/// and an echo tool with configurable delay.
inline std::shared_ptr<const Registry> builtin_registry(std::int64_t echo_timeout_ms = 2000) {
    auto reg = std::make_shared<Registry>();
    ToolSpec search{"search", ToolKind::Program, {{"query", ValueType::String, true, std::nullopt},
                                                 {"top_k", ValueType::Number, false, nlohmann::json(2)}},
                    "builtin:corpus_search", 2000, 0, "corpus search",
                    nlohmann::json{{"corpus", (data_dir() / "corpus.tsv").string()}}};
    ToolSpec calc{"calculator", ToolKind::Program, {{"expr", ValueType::String, true, std::nullopt}},
                  "builtin:calculator", 1000, 0, "calculator", nlohmann::json::object()};
    ToolSpec echo{"echo", ToolKind::Program, {{"text", ValueType::String, false, nlohmann::json("")},
                                             {"delay_ms", ValueType::Number, false, nlohmann::json(0)}},
                  "builtin:echo", echo_timeout_ms, 0, "echo after a delay", nlohmann::json::object()};
    reg->add(search);
    reg->add(calc);
    reg->add(echo);
    return reg;
}

inline ToolCall make_call(std::string name, nlohmann::json args) {
    ToolCall c;
    c.tool_name = std::move(name);
    c.arguments = std::move(args);
    return c;
}

inline std::string call_text(const std::string& name, const nlohmann::json& args) {
    return format_call(make_call(name, args));
}

/// Generator driven by a lambda; records every request context.
class LambdaGenerator final : public Generator {
public:
    using Fn = std::function<std::string(const GenRequest&)>;
    explicit LambdaGenerator(Fn fn, bool deterministic = true) : fn_(std::move(fn)), deterministic_(deterministic) {}

    std::string generate(const GenRequest& request) const override {
        {
            std::lock_guard lock(mu_);
            contexts_.emplace_back(request.context);
            tools_enabled_.push_back(request.tools_enabled);
        }
        return fn_(request);
    }
    bool deterministic() const override { return deterministic_; }

    std::vector<std::string> contexts() const {
        std::lock_guard lock(mu_);
        return contexts_;
    }
    std::vector<bool> tools_enabled() const {
        std::lock_guard lock(mu_);
        return tools_enabled_;
    }

private:
    Fn fn_;
    bool deterministic_;
    mutable std::mutex mu_;
    mutable std::vector<std::string> contexts_;
    mutable std::vector<bool> tools_enabled_;
};

}  // namespace toolforge::testing
