#include "toolforge/harness.hpp"

#include "toolforge/errors.hpp"
#include "toolforge/generator.hpp"
#include "toolforge/http_client.hpp"
#include "toolforge/invoker.hpp"
#include "toolforge/records.hpp"
#include "toolforge/tool_registry.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>

namespace toolforge {
namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError(path.string() + ": cannot open file");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigParseError(path.string() + ": " + e.what());
    }
}

const nlohmann::json& section(const nlohmann::json& doc, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!doc.contains(key)) return empty;
    const auto& s = doc.at(key);
    if (!s.is_object()) throw ConfigParseError(std::string(key) + ": expected object");
    return s;
}

std::size_t positive_size(const nlohmann::json& obj, const std::string& path, const char* key, std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigParseError(path + "." + key + ": expected integer >= 1");
    return v.get<std::size_t>();
}

double number(const nlohmann::json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigParseError(path + "." + key + ": expected number");
    return v.get<double>();
}

std::string string_field(const nlohmann::json& obj, const std::string& path, const char* key, std::string fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ConfigParseError(path + "." + key + ": expected string");
    return v.get<std::string>();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(path.string() + ": cannot write file");
    out << content;
}

double mean(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

}  // namespace

RunConfig load_run_config(const RunOptions& opts) {
    const nlohmann::json doc = read_json_file(opts.config);
    RunConfig cfg;
    try {
        if (!doc.is_object()) throw ConfigParseError("$: expected object");
        if (!doc.contains("schema_version") || doc.at("schema_version") != 1) {
            throw ConfigParseError("schema_version: expected 1");
        }

        const auto& rollout = section(doc, "rollout");
        auto& rc = cfg.rollout;
        rc.max_turns = positive_size(rollout, "rollout", "max_turns", rc.max_turns);
        rc.group_size = positive_size(rollout, "rollout", "group_size", rc.group_size);
        rc.max_concurrent_groups = positive_size(rollout, "rollout", "max_concurrent_groups", rc.max_concurrent_groups);
        rc.max_failed_rounds = positive_size(rollout, "rollout", "max_failed_rounds", rc.max_failed_rounds);
        rc.gen_params.temperature = number(rollout, "rollout", "temperature", rc.gen_params.temperature);
        rc.gen_params.max_new_tokens =
            static_cast<int>(positive_size(rollout, "rollout", "max_new_tokens", static_cast<std::size_t>(rc.gen_params.max_new_tokens)));
        if (rollout.contains("advertise_tools")) {
            if (!rollout.at("advertise_tools").is_boolean()) throw ConfigParseError("rollout.advertise_tools: expected boolean");
            rc.advertise_tools = rollout.at("advertise_tools").get<bool>();
        }
        if (doc.contains("seed")) {
            if (!doc.at("seed").is_number_unsigned()) throw ConfigParseError("seed: expected nonnegative integer");
            rc.seed = doc.at("seed").get<std::uint64_t>();
        }

        rc.grammar = string_field(section(doc, "parser"), "parser", "grammar", rc.grammar);
        make_grammar(rc.grammar);

        if (doc.contains("template")) {
            const auto& t = doc.at("template");
            try {
                rc.chat_template = t.is_string() ? ChatTemplate::by_id(t.get<std::string>()) : ChatTemplate::from_json(t);
            } catch (const TemplateError& e) {
                throw ConfigParseError(std::string("template: ") + e.what());
            }
        }

        const auto& gen = section(doc, "generator");
        cfg.remote.endpoint = string_field(gen, "generator", "endpoint", "");
        cfg.remote.model = string_field(gen, "generator", "model", cfg.remote.model);
        cfg.remote.timeout_ms = static_cast<std::int64_t>(
            positive_size(gen, "generator", "timeout_ms", static_cast<std::size_t>(cfg.remote.timeout_ms)));
        if (gen.contains("retries")) {
            if (!gen.at("retries").is_number_unsigned()) throw ConfigParseError("generator.retries: expected nonnegative integer");
            cfg.remote.retries = gen.at("retries").get<int>();
        }

        if (opts.group_size) rc.group_size = *opts.group_size;
        if (opts.max_turns) rc.max_turns = *opts.max_turns;
        if (opts.seed) rc.seed = *opts.seed;
        if (opts.max_concurrent_groups) rc.max_concurrent_groups = *opts.max_concurrent_groups;
        if (opts.gen_endpoint) cfg.remote.endpoint = *opts.gen_endpoint;
        rc.validate();

        cfg.reward = RewardConfig::from_json(section(doc, "reward"), rc.max_turns);
        cfg.reward.grammar = rc.grammar;
    } catch (const ConfigParseError& e) {
        throw ConfigParseError(opts.config.string() + ": " + e.what());
    }

    cfg.snapshot = {{"schema_version", 1},
                    {"seed", cfg.rollout.seed},
                    {"rollout",
                     {{"max_turns", cfg.rollout.max_turns},
                      {"group_size", cfg.rollout.group_size},
                      {"max_concurrent_groups", cfg.rollout.max_concurrent_groups},
                      {"max_failed_rounds", cfg.rollout.max_failed_rounds},
                      {"temperature", cfg.rollout.gen_params.temperature},
                      {"max_new_tokens", cfg.rollout.gen_params.max_new_tokens},
                      {"advertise_tools", cfg.rollout.advertise_tools}}},
                    {"parser", {{"grammar", cfg.rollout.grammar}}},
                    {"template", cfg.rollout.chat_template.to_json()},
                    {"reward", cfg.reward.to_json()}};
    return cfg;
}

nlohmann::json aggregate_metrics(const std::vector<nlohmann::json>& records, std::optional<double> wall_seconds) {
    double reward_sum = 0, turns_sum = 0, rounds_sum = 0, judge_sum = 0, verify_sum = 0;
    std::size_t rewarded = 0, judged = 0, verified = 0, judge_failures = 0;
    std::map<std::string, std::pair<double, std::size_t>> rule_sums;
    std::map<std::string, std::size_t> terminals;

    for (const auto& rec : records) {
        turns_sum += rec.at("num_turns").get<double>();
        rounds_sum += rec.at("num_rounds").get<double>();
        const auto& term = rec.at("terminal");
        ++terminals[term.is_null() ? "none" : term.get<std::string>()];
        const auto& reward = rec.at("reward");
        if (reward.is_null()) continue;
        reward_sum += reward.at("total").get<double>();
        ++rewarded;
        for (const auto& [name, score] : reward.at("rule_scores").items()) {
            auto& acc = rule_sums[name];
            acc.first += score.get<double>();
            ++acc.second;
        }
        if (!reward.at("r_judge").is_null()) {
            judge_sum += reward.at("r_judge").get<double>();
            ++judged;
        }
        if (reward.contains("judge_error")) ++judge_failures;
        if (!reward.at("r_verify").is_null()) {
            verify_sum += reward.at("r_verify").get<double>();
            ++verified;
        }
    }

    nlohmann::json rule_means = nlohmann::json::object();
    for (const auto& [name, acc] : rule_sums) rule_means[name] = mean(acc.first, acc.second);

    const double n = static_cast<double>(records.size());
    nlohmann::json m = {{"episodes", records.size()},
                        {"mean_reward", mean(reward_sum, rewarded)},
                        {"mean_turns", mean(turns_sum, records.size())},
                        {"mean_rounds", mean(rounds_sum, records.size())},
                        {"mean_rule_scores", rule_means},
                        {"terminal_counts", terminals},
                        {"judge_failures", judge_failures}};
    m["mean_judge"] = judged ? nlohmann::json(mean(judge_sum, judged)) : nlohmann::json();
    m["mean_verify"] = verified ? nlohmann::json(mean(verify_sum, verified)) : nlohmann::json();
    if (wall_seconds && *wall_seconds > 0) {
        m["wall_seconds"] = *wall_seconds;
        m["episodes_per_minute"] = n / *wall_seconds * 60.0;
    }
    return m;
}

nlohmann::json run_rollout(const RunOptions& opts) {
    if (opts.gen_endpoint && opts.gen_script) throw ConfigParseError("--gen-endpoint and --gen-script are exclusive");
    RunConfig cfg = load_run_config(opts);

    auto registry = std::make_shared<const Registry>(load_registry(opts.tools));
    const auto tasks = load_tasks(opts.tasks);
    auto invoker = std::make_shared<const Invoker>(registry);

    std::shared_ptr<const Generator> generator;
    std::string generator_kind;
    if (opts.gen_script) {
        generator = std::make_shared<const ScriptedGenerator>(ScriptedGenerator::load(*opts.gen_script));
        generator_kind = "scripted";
    } else if (!cfg.remote.endpoint.empty()) {
        generator = std::make_shared<const RemoteGenerator>(cfg.remote);
        generator_kind = "remote";
    } else {
        throw ConfigParseError("--gen-endpoint or --gen-script is required");
    }

    const RewardScorer scorer(cfg.reward, invoker);
    const RolloutEngine engine(generator, invoker, cfg.rollout);

    const auto start = std::chrono::steady_clock::now();
    BatchResult batch = engine.run_batch(tasks);
    for (auto& group : batch.groups) score_group(group, scorer);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::filesystem::create_directories(opts.out);
    std::vector<nlohmann::json> records;
    std::string lines;
    std::size_t discarded = 0;
    nlohmann::json discarded_list = nlohmann::json::array();
    for (const auto& group : batch.groups) {
        for (std::size_t i = 0; i < group.episodes.size(); ++i) {
            records.push_back(episode_record(group, i, engine.grammar()));
            lines += dump_line(records.back());
            lines += "\n";
        }
        discarded += group.discarded.size();
        for (const auto& reason : group.discarded) discarded_list.push_back({{"task_id", group.task_id}, {"reason", reason}});
    }
    write_file(opts.out / "episodes.jsonl", lines);

    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : batch.failures) failures.push_back({{"task_id", f.task_id}, {"reason", f.reason}});

    nlohmann::json manifest = {
        {"engine_version", kEngineVersion},
        {"seed", cfg.rollout.seed},
        {"config", cfg.snapshot},
        {"inputs", {{"tools", opts.tools.string()}, {"tasks", opts.tasks.string()}, {"config", opts.config.string()}}},
        {"generator", {{"kind", generator_kind}, {"deterministic", generator->deterministic()}}},
        {"counts",
         {{"tasks", tasks.size()},
          {"groups", batch.groups.size()},
          {"episodes", records.size()},
          {"discarded_episodes", discarded},
          {"failed_groups", batch.failures.size()}}},
        {"metrics", aggregate_metrics(records, wall)},
        {"failures", failures},
        {"discarded", discarded_list}};
    write_file(opts.out / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

int cli_rollout(const RunOptions& opts, std::ostream& err) {
    if (opts.tools.empty()) {
        err << "error: --tools is required\n";
        return kExitConfigError;
    }
    if (opts.tasks.empty()) {
        err << "error: --tasks is required\n";
        return kExitConfigError;
    }
    if (opts.config.empty()) {
        err << "error: --config is required\n";
        return kExitConfigError;
    }
    if (opts.out.empty()) {
        err << "error: --out is required\n";
        return kExitConfigError;
    }
    nlohmann::json manifest;
    try {
        manifest = run_rollout(opts);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    const auto& counts = manifest.at("counts");
    for (const auto& f : manifest.at("failures")) {
        err << "task " << f.at("task_id").get<std::string>() << " failed: " << f.at("reason").get<std::string>() << "\n";
    }
    if (counts.at("groups").get<std::size_t>() == 0) {
        err << "error: every task failed\n";
        return kExitBatchFailed;
    }
    return kExitOk;
}

nlohmann::json summarize(const std::filesystem::path& run_dir) {
    const auto episodes = run_dir / "episodes.jsonl";
    if (!std::filesystem::exists(episodes)) throw EmptyRun(run_dir.string() + ": no episode records");
    const auto records = read_jsonl(episodes);
    if (records.empty()) throw EmptyRun(run_dir.string() + ": no episode records");

    std::optional<double> wall;
    nlohmann::json manifest;
    if (std::filesystem::exists(run_dir / "manifest.json")) {
        manifest = read_json_file(run_dir / "manifest.json");
        if (manifest.contains("metrics") && manifest["metrics"].contains("wall_seconds")) {
            wall = manifest["metrics"]["wall_seconds"].get<double>();
        }
    }
    nlohmann::json summary = aggregate_metrics(records, wall);
    if (!manifest.is_null()) {
        summary["engine_version"] = manifest.value("engine_version", "");
        summary["seed"] = manifest.value("seed", nlohmann::json());
        summary["deterministic"] = manifest.contains("generator") ? manifest["generator"].value("deterministic", false) : false;
    }
    return summary;
}

void init_logging() {
    auto logger = spdlog::stderr_color_mt("toolforge");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("TOOLFORGE_LOG")) {
        spdlog::set_level(spdlog::level::from_str(level));
    }
}

}  // namespace toolforge
