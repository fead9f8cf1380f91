#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace toolforge {

struct GenParams {
    double temperature = 1.0;
    int max_new_tokens = 512;
};

/// Everything a generator sees for one turn. `context` is the rendered
/// trajectory so far; the remaining fields identify the episode so stateless
/// generators can stay reentrant.
struct GenRequest {
    std::string_view context;
    GenParams params;
    /// False on the forced-answer turn after the tool budget is spent.
    bool tools_enabled = true;
    std::string_view task_id;
    std::size_t episode = 0;
    /// Zero-based generation index within the episode.
    std::size_t turn = 0;
    std::uint64_t seed = 0;
};

/// Policy under rollout. Implementations must tolerate concurrent calls from
/// different episode workers.
class Generator {
public:
    virtual ~Generator() = default;

    /// Throws GeneratorUnavailable when no response can be produced.
    virtual std::string generate(const GenRequest& request) const = 0;
    /// True when the same requests always produce the same responses.
    virtual bool deterministic() const = 0;
};

/// A step of a scripted episode.
struct LiteralStep {
    std::string text;
};
/// Picks one alternative from a per-episode seeded stream.
struct ChoiceStep {
    std::vector<std::string> choices;
};
/// Applies `pattern` to the context and formats the last match with
/// `format` (`$1`-style back-references); `fallback` when nothing matches.
struct ExtractStep {
    std::string pattern;
    std::string format;
    std::string fallback;
};
using ScriptStep = std::variant<LiteralStep, ChoiceStep, ExtractStep>;

struct Script {
    std::vector<ScriptStep> steps;
    /// Response used when tools are disabled; defaults to the next step.
    std::optional<std::string> forced_answer;
};

/// Fixture-driven generator. Turn `t` of an episode plays step `t` of the
/// task's script (the last step repeats once the script runs out). A script
/// keyed "*" serves tasks without their own.
///
/// Script files are line-delimited records:
///   {"task_id": "q1", "responses": [<step>...], "forced_answer": "..."}
/// where a step is a string, {"choices": [...]}, or
/// {"extract": "<regex>", "format": "...", "fallback": "..."}.
class ScriptedGenerator final : public Generator {
public:
    explicit ScriptedGenerator(std::map<std::string, Script> scripts);

    /// Throws ConfigParseError naming the file and line on bad records.
    static ScriptedGenerator load(const std::filesystem::path& path);
    static Script parse_script(const nlohmann::json& record, std::string_view where);

    std::string generate(const GenRequest& request) const override;
    bool deterministic() const override { return true; }

    const std::map<std::string, Script>& scripts() const { return scripts_; }

private:
    std::map<std::string, Script> scripts_;
};

struct RemoteGeneratorConfig {
    std::string endpoint;  // http://host:port/v1/chat/completions
    std::string model = "default";
    std::int64_t timeout_ms = 60000;
    int retries = 2;
};

/// Chat-completion client. The rendered context goes out as a single user
/// message; tool-disabled turns add a system note asking for the answer.
class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(RemoteGeneratorConfig config);

    std::string generate(const GenRequest& request) const override;
    bool deterministic() const override { return false; }

    static constexpr std::string_view kForcedAnswerNote =
        "Tool calling is disabled for this turn. Give your final answer now without calling any tool.";

private:
    RemoteGeneratorConfig config_;
};

/// Stable 64-bit seed for one episode of one task.
std::uint64_t episode_seed(std::uint64_t base_seed, std::string_view task_id, std::size_t episode);

}  // namespace toolforge
