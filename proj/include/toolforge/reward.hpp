#pragma once

#include "toolforge/call_parser.hpp"
#include "toolforge/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace toolforge {

class Invoker;

// ---- rule reward -------------------------------------------------------------

enum class RuleDimension { FormatValidity, TaskCompletion, Efficiency };

std::string_view to_string(RuleDimension dim);

struct Rule {
    std::string name;
    double weight = 1.0;
    RuleDimension dimension = RuleDimension::TaskCompletion;
};

struct RuleSet {
    std::vector<Rule> rules;

    /// Throws ConfigParseError on non-finite weights or repeated names.
    void validate() const;
    static RuleSet from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct RuleScores {
    std::vector<std::pair<std::string, double>> per_rule;
    double total = 0.0;  // sum of weight * score
};

/// Lowercases, drops punctuation and collapses whitespace.
std::string normalize_answer(std::string_view text);

/// The answer part of a final response: the inside of the last
/// `<answer>...</answer>` block, else the remainder of the last line starting
/// with "Answer:", else the whole text.
std::string extract_answer(std::string_view final_answer);

/// Normalized exact match of the extracted answer against `ground_truth`.
bool answer_matches(std::string_view final_answer, std::string_view ground_truth);

/// Number of model turns whose calls were parsed cleanly and executed.
std::size_t invocation_rounds(const Trajectory& traj, const CallGrammar& grammar);

/// True iff every ModelText that opens a call block parses cleanly.
bool calls_well_formed(const Trajectory& traj, const CallGrammar& grammar);

/// Weighted rule reward. FormatValidity and TaskCompletion score 0 or 1;
/// Efficiency scores max(0, 1 - rounds / max_turns).
RuleScores compute_rule_score(const Trajectory& traj, std::string_view ground_truth, const RuleSet& rules,
                              std::size_t max_turns, const CallGrammar& grammar);
RuleScores compute_rule_score(const Trajectory& traj, std::string_view ground_truth, const RuleSet& rules,
                              std::size_t max_turns);

// ---- judge reward ------------------------------------------------------------

struct JudgeConfig {
    std::string endpoint;
    std::string model = "judge";
    /// Criterion prompt; `{trajectory}` and `{ground_truth}` are required,
    /// `{final_answer}` and `{prompt}` are optional.
    std::string criterion_template = default_template();
    std::int64_t timeout_ms = 30000;
    std::size_t max_parallel = 8;

    static std::string default_template();
};

/// Final line appended to every judge prompt.
inline constexpr std::string_view kScoreInstruction =
    "End your reply with a final line of the form `SCORE: <number between 0 and 1>`.";

/// Throws TemplateError on a missing required or unknown placeholder.
std::string build_judge_prompt(const Trajectory& traj, std::string_view ground_truth, const JudgeConfig& cfg);

/// Value of the last `SCORE: <number>` line, clamped to [0, 1]. Throws
/// ScoreNotFound when no line matches.
double extract_judge_score(std::string_view judge_output);

struct JudgeOutcome {
    std::optional<double> score;
    std::string raw_output;
    std::string error;  // nonempty when score is absent
};

/// Sends judge prompts to a chat-completion endpoint.
JudgeOutcome judge_episode(const Trajectory& traj, std::string_view ground_truth, const JudgeConfig& cfg);

// ---- verify reward -----------------------------------------------------------

enum class Comparator { ExactMatch, NumericTolerance };

struct VerifySpec {
    std::string tool;
    std::string expected;
    Comparator comparator = Comparator::ExactMatch;
    double epsilon = 0.0;

    /// Throws ConfigParseError when epsilon is negative or not finite.
    void validate() const;
};

/// Comparator g: trimmed equality, or |actual - expected| <= epsilon.
bool compare_result(const VerifySpec& spec, std::string_view actual);

struct VerifyOutcome {
    std::string verified_results;
    double r_verify = 0.0;
};

/// Runs each episode's extracted answer through its verifier tool; all
/// episodes are verified concurrently. `specs` aligns with `episodes`.
std::vector<VerifyOutcome> verify_outputs(const Invoker& invoker, std::span<const Trajectory> episodes,
                                          std::span<const VerifySpec> specs);

// ---- combination -------------------------------------------------------------

struct RewardReport {
    std::vector<std::pair<std::string, double>> rule_scores;
    std::optional<double> r_rule;
    std::optional<double> r_judge;
    std::optional<double> r_verify;
    double total = 0.0;
    std::optional<std::string> verified_results;
    /// Why an enabled judge produced no score.
    std::optional<std::string> judge_error;

    nlohmann::json to_json() const;
    static RewardReport from_json(const nlohmann::json& j);
};

struct ComponentWeights {
    double rule = 1.0;
    double judge = 1.0;
    double verify = 1.0;
};

struct VerifySettings {
    std::string tool;
    Comparator comparator = Comparator::ExactMatch;
    double epsilon = 0.0;
};

struct RewardConfig {
    RuleSet rules;  // empty disables the rule component
    std::optional<JudgeConfig> judge;
    std::optional<VerifySettings> verify;  // expected value is the task's ground truth
    /// Without explicit weights the total is the mean of available components.
    std::optional<ComponentWeights> weights;
    std::size_t max_turns = 4;
    std::string grammar = "qwen3";

    static RewardConfig from_json(const nlohmann::json& j, std::size_t max_turns);
    nlohmann::json to_json() const;
};

/// Total of the components present in `report`.
double combine_components(const RewardReport& report, const std::optional<ComponentWeights>& weights);

/// Scores trajectories with every enabled component. Judge and verify calls
/// fan out across episodes; reports come back in episode order.
class RewardScorer {
public:
    RewardScorer(RewardConfig config, std::shared_ptr<const Invoker> invoker);

    std::vector<RewardReport> score(std::span<const Trajectory> episodes, std::string_view ground_truth) const;

    const RewardConfig& config() const { return config_; }

private:
    RewardConfig config_;
    std::shared_ptr<const Invoker> invoker_;
    std::shared_ptr<const CallGrammar> grammar_;
};

// ---- group-relative advantage ------------------------------------------------

inline constexpr double kAdvantageEpsilon = 1e-8;

/// (r - mean) / (population std + 1e-8); all zeros when the std is exactly 0.
std::vector<double> group_advantages(std::span<const double> rewards);

}  // namespace toolforge
