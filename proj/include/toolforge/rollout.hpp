#pragma once

#include "toolforge/call_parser.hpp"
#include "toolforge/chat_template.hpp"
#include "toolforge/generator.hpp"
#include "toolforge/invoker.hpp"
#include "toolforge/reward.hpp"
#include "toolforge/trajectory.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace toolforge {

struct RolloutConfig {
    /// Budget of tool-invocation rounds per episode.
    std::size_t max_turns = 4;
    /// Episodes per prompt.
    std::size_t group_size = 1;
    GenParams gen_params;
    std::string grammar = "qwen3";
    ChatTemplate chat_template = ChatTemplate::qwen3();
    /// Advertise the registry's tools in the system message.
    bool advertise_tools = true;
    std::size_t max_concurrent_groups = 4;
    /// Consecutive rounds in which every call fails before ToolFailureAbort.
    std::size_t max_failed_rounds = 3;
    std::uint64_t seed = 0;
    Tokenizer tokenizer = default_tokenizer();

    /// Throws ConfigParseError on zero turns, group size or concurrency.
    void validate() const;
};

struct TaskRecord {
    std::string task_id;
    std::string prompt;
    std::string ground_truth;
};

struct EpisodeGroup {
    std::string task_id;
    std::string prompt;
    std::string ground_truth;
    /// Surviving episodes, in episode order.
    std::vector<Trajectory> episodes;
    /// Episode index of each surviving trajectory.
    std::vector<std::size_t> episode_indices;
    /// Reasons for episodes discarded after generator failure.
    std::vector<std::string> discarded;
    /// Empty until scored; then aligned with `episodes`.
    std::vector<RewardReport> reports;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

struct GroupFailure {
    std::size_t task_index = 0;
    std::string task_id;
    std::string reason;
};

struct BatchResult {
    /// Successful groups in task order.
    std::vector<EpisodeGroup> groups;
    std::vector<GroupFailure> failures;
};

/// Drives the generate, parse, invoke, update loop.
class RolloutEngine {
public:
    RolloutEngine(std::shared_ptr<const Generator> generator, std::shared_ptr<const Invoker> invoker,
                  RolloutConfig config);

    /// One episode. Ends on a final answer, a second consecutive malformed
    /// response, repeated all-failed rounds, or after `max_turns` rounds with
    /// a forced tool-free answer turn. Throws GeneratorUnavailable (the
    /// episode is discarded, never truncated).
    Trajectory run_episode(const std::string& task_id, const std::string& prompt, std::size_t episode_index = 0) const;

    /// `group_size` concurrent episodes of one prompt. Throws
    /// GeneratorUnavailable only when every episode fails.
    EpisodeGroup run_group(const TaskRecord& task) const;

    /// Groups for all tasks with at most `max_concurrent_groups` in flight.
    BatchResult run_batch(const std::vector<TaskRecord>& tasks) const;

    /// Template actually used for rendering (tool instructions included).
    const ChatTemplate& effective_template() const { return template_; }
    const RolloutConfig& config() const { return config_; }
    const CallGrammar& grammar() const { return *grammar_; }

private:
    std::shared_ptr<const Generator> generator_;
    std::shared_ptr<const Invoker> invoker_;
    RolloutConfig config_;
    std::shared_ptr<const CallGrammar> grammar_;
    ChatTemplate template_;
};

/// Scores a group in place: reports, rewards (report totals) and advantages.
void score_group(EpisodeGroup& group, const RewardScorer& scorer);

}  // namespace toolforge
