#pragma once

#include "toolforge/reward.hpp"
#include "toolforge/rollout.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace toolforge {

inline constexpr std::string_view kEngineVersion = "0.1.0";

/// Exit codes of the `rollout` command.
enum ExitCode : int { kExitOk = 0, kExitConfigError = 2, kExitBatchFailed = 3 };

/// Flags of the `rollout` command. Unset optionals fall back to the config file.
struct RunOptions {
    std::filesystem::path tools;
    std::filesystem::path tasks;
    std::filesystem::path config;
    std::optional<std::string> gen_endpoint;
    std::optional<std::filesystem::path> gen_script;
    std::optional<std::size_t> group_size;
    std::optional<std::size_t> max_turns;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_concurrent_groups;
    std::filesystem::path out;
};

/// Parsed main config file merged with command-line overrides.
struct RunConfig {
    RolloutConfig rollout;
    RewardConfig reward;
    RemoteGeneratorConfig remote;
    nlohmann::json snapshot;  // effective settings, recorded in the manifest
};

/// Reads the config document (`schema_version` 1) and applies `opts`.
/// Throws ConfigParseError naming the file and field.
RunConfig load_run_config(const RunOptions& opts);

/// Runs a batch end to end and writes `episodes.jsonl` and `manifest.json`
/// under `opts.out`. Configuration problems throw (ConfigParseError,
/// DuplicateTool, InvalidSpec, TemplateError); episode failures are recorded.
/// Returns the manifest.
nlohmann::json run_rollout(const RunOptions& opts);

/// run_rollout with the CLI's exit-code contract; diagnostics go to `err`.
int cli_rollout(const RunOptions& opts, std::ostream& err);

/// Recomputes aggregate metrics from a run directory's episode records
/// (and the manifest's wall time, when present). Throws EmptyRun.
nlohmann::json summarize(const std::filesystem::path& run_dir);

/// Aggregates over episode records; shared by run_rollout and summarize.
nlohmann::json aggregate_metrics(const std::vector<nlohmann::json>& records, std::optional<double> wall_seconds);

/// Sets the log level from TOOLFORGE_LOG (trace|debug|info|warn|error|off).
void init_logging();

}  // namespace toolforge
