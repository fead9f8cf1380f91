#pragma once

#include "toolforge/reward.hpp"
#include "toolforge/rollout.hpp"
#include "toolforge/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace toolforge {

/// `{"task_id", "spans": [{"kind","text","token_count","turn"}], "terminal", "final_answer"}`.
/// An unfinished trajectory serializes `terminal` as null; a missing answer is null.
nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

/// Compact single-line dump; keys sorted, invalid UTF-8 replaced.
std::string dump_line(const nlohmann::json& j);

/// One line of an episode output file: the trajectory fields plus
/// `episode`, `num_turns`, `num_rounds`, `reward` and `advantage`.
nlohmann::json episode_record(const EpisodeGroup& group, std::size_t i, const CallGrammar& grammar);

/// Reads `{task_id, prompt, ground_truth}` lines. Throws ConfigParseError
/// naming the file, line and field; task ids must be unique.
std::vector<TaskRecord> load_tasks(const std::filesystem::path& path);

/// Parses every nonblank line of a line-delimited JSON file.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace toolforge
