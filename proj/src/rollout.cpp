#include "toolforge/rollout.hpp"

#include "toolforge/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <future>
#include <optional>
#include <thread>

namespace toolforge {

void RolloutConfig::validate() const {
    if (max_turns < 1) throw ConfigParseError("rollout.max_turns: must be >= 1");
    if (group_size < 1) throw ConfigParseError("rollout.group_size: must be >= 1");
    if (max_concurrent_groups < 1) throw ConfigParseError("rollout.max_concurrent_groups: must be >= 1");
    if (max_failed_rounds < 1) throw ConfigParseError("rollout.max_failed_rounds: must be >= 1");
    if (!tokenizer) throw ConfigParseError("rollout: tokenizer is not set");
    chat_template.validate();
}

RolloutEngine::RolloutEngine(std::shared_ptr<const Generator> generator, std::shared_ptr<const Invoker> invoker,
                             RolloutConfig config)
    : generator_(std::move(generator)),
      invoker_(std::move(invoker)),
      config_(std::move(config)),
      grammar_(make_grammar(config_.grammar)),
      template_(config_.chat_template) {
    config_.validate();
    if (!generator_) throw ConfigParseError("rollout: no generator");
    if (!invoker_) throw ConfigParseError("rollout: no tool invoker");
    if (config_.advertise_tools && invoker_->registry().size() > 0) {
        template_ = template_.with_system_suffix(grammar_->instructions(invoker_->registry()));
    }
}

Trajectory RolloutEngine::run_episode(const std::string& task_id, const std::string& prompt,
                                      std::size_t episode_index) const {
    if (prompt.empty()) throw Error("run_episode: prompt is empty");
    const auto& tok = config_.tokenizer;

    Trajectory traj;
    traj.task_id = task_id;
    traj = append_span(traj, SegmentKind::Prompt, prompt, 0, tok);

    GenRequest request;
    request.params = config_.gen_params;
    request.task_id = task_id;
    request.episode = episode_index;
    request.seed = episode_seed(config_.seed, task_id, episode_index);

    std::size_t turn = 0;
    std::size_t rounds = 0;
    std::size_t malformed_streak = 0;
    std::size_t failed_round_streak = 0;

    for (;;) {
        const std::string context = render_context(traj, template_);
        request.context = context;
        request.turn = turn;
        request.tools_enabled = rounds < config_.max_turns;

        std::string response = generator_->generate(request);

        if (!request.tools_enabled) {
            traj = append_span(traj, SegmentKind::ModelText, response, turn, tok);
            traj.final_answer = grammar_->strip_calls(response);
            traj.terminal = TerminalReason::MaxTurnsReached;
            return traj;
        }

        traj = append_span(traj, SegmentKind::ModelText, response, turn, tok);
        ParseOutcome outcome = grammar_->parse(response);

        if (auto* done = std::get_if<ParsedTerminate>(&outcome)) {
            traj.final_answer = std::move(done->final_answer);
            traj.terminal = TerminalReason::AnswerProduced;
            return traj;
        }

        if (auto* bad = std::get_if<ParsedMalformed>(&outcome)) {
            if (++malformed_streak >= 2) {
                traj.terminal = TerminalReason::ParseFailureAbort;
                return traj;
            }
            traj = append_span(traj, SegmentKind::Observation, format_parse_error(bad->reason, *grammar_), turn, tok);
            ++turn;
            continue;
        }

        malformed_streak = 0;
        const auto& calls = std::get<ParsedCalls>(outcome).calls;
        const auto results = invoker_->invoke_round(calls);
        for (std::size_t i = 0; i < calls.size(); ++i) {
            traj = append_span(traj, SegmentKind::Observation, format_observation(calls[i], results[i], *grammar_), turn, tok);
        }
        ++rounds;

        const bool all_failed = std::none_of(results.begin(), results.end(), [](const auto& r) { return r.ok(); });
        failed_round_streak = all_failed ? failed_round_streak + 1 : 0;
        if (failed_round_streak >= config_.max_failed_rounds) {
            traj.terminal = TerminalReason::ToolFailureAbort;
            return traj;
        }
        ++turn;
    }
}

EpisodeGroup RolloutEngine::run_group(const TaskRecord& task) const {
    EpisodeGroup group;
    group.task_id = task.task_id;
    group.prompt = task.prompt;
    group.ground_truth = task.ground_truth;

    std::vector<std::future<Trajectory>> running;
    running.reserve(config_.group_size);
    for (std::size_t i = 0; i < config_.group_size; ++i) {
        running.push_back(std::async(std::launch::async, [this, &task, i] {
            return run_episode(task.task_id, task.prompt, i);
        }));
    }
    for (std::size_t i = 0; i < running.size(); ++i) {
        try {
            group.episodes.push_back(running[i].get());
            group.episode_indices.push_back(i);
        } catch (const GeneratorUnavailable& e) {
            spdlog::warn("task {} episode {} discarded: {}", task.task_id, i, e.what());
            group.discarded.push_back(e.what());
        }
    }
    if (group.episodes.empty()) {
        throw GeneratorUnavailable("all " + std::to_string(config_.group_size) + " episodes of task '" + task.task_id +
                                   "' failed: " + group.discarded.front());
    }
    return group;
}

BatchResult RolloutEngine::run_batch(const std::vector<TaskRecord>& tasks) const {
    std::vector<std::optional<EpisodeGroup>> groups(tasks.size());
    std::vector<std::optional<std::string>> errors(tasks.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                groups[i] = run_group(tasks[i]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const std::size_t workers = std::min(config_.max_concurrent_groups, tasks.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    BatchResult result;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (groups[i]) result.groups.push_back(std::move(*groups[i]));
        else result.failures.push_back({i, tasks[i].task_id, errors[i].value_or("unknown failure")});
    }
    return result;
}

void score_group(EpisodeGroup& group, const RewardScorer& scorer) {
    group.reports = scorer.score(group.episodes, group.ground_truth);
    group.rewards.clear();
    for (const auto& r : group.reports) group.rewards.push_back(r.total);
    group.advantages = group_advantages(group.rewards);
}

}  // namespace toolforge
