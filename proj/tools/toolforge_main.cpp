#include "toolforge/errors.hpp"
#include "toolforge/harness.hpp"
#include "toolforge/mock_server.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <iostream>

namespace {

toolforge::MockServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    toolforge::init_logging();

    CLI::App app{"toolforge: multi-turn tool-call rollout engine"};
    app.require_subcommand(1);

    // rollout
    auto* rollout = app.add_subcommand("rollout", "Run episode groups for a task file and score them");
    toolforge::RunOptions opts;
    std::string tools, tasks, config, out, gen_script, gen_endpoint;
    std::size_t group_size = 0, max_turns = 0, max_groups = 0;
    std::uint64_t seed = 0;
    rollout->add_option("--tools", tools, "Tool config file");
    rollout->add_option("--tasks", tasks, "Task file (one {task_id, prompt, ground_truth} per line)");
    rollout->add_option("--config", config, "Main config file");
    auto* endpoint_opt = rollout->add_option("--gen-endpoint", gen_endpoint, "Chat-completion generator URL");
    auto* script_opt = rollout->add_option("--gen-script", gen_script, "Scripted generator file");
    endpoint_opt->excludes(script_opt);
    auto* group_opt = rollout->add_option("--group-size", group_size, "Episodes per task")->check(CLI::PositiveNumber);
    auto* turns_opt = rollout->add_option("--max-turns", max_turns, "Tool rounds per episode")->check(CLI::PositiveNumber);
    auto* seed_opt = rollout->add_option("--seed", seed, "Run seed");
    auto* groups_opt =
        rollout->add_option("--max-concurrent-groups", max_groups, "Groups in flight")->check(CLI::PositiveNumber);
    rollout->add_option("--out", out, "Output directory")->default_val("out");

    // serve-mock
    auto* serve = app.add_subcommand("serve-mock", "Serve a mock model, judge or slow tool");
    std::string kind;
    int port = 8080;
    double score = 1.0;
    int delay_ms = 0;
    std::string reply;
    serve->add_option("--kind", kind, "echo_model | scripted_judge | slow_tool")->required();
    serve->add_option("--port", port, "Port to bind (0 picks one)")->default_val(8080);
    serve->add_option("--score", score, "scripted_judge score")->default_val(1.0);
    auto* reply_opt = serve->add_option("--reply", reply, "scripted_judge full reply text");
    serve->add_option("--delay-ms", delay_ms, "Delay before each response")->default_val(0);

    // summarize
    auto* summary_cmd = app.add_subcommand("summarize", "Recompute aggregate metrics of a run directory");
    std::string run_dir;
    summary_cmd->add_option("run_dir", run_dir, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : toolforge::kExitConfigError;
    }

    if (rollout->parsed()) {
        opts.tools = tools;
        opts.tasks = tasks;
        opts.config = config;
        opts.out = out;
        if (*script_opt) opts.gen_script = gen_script;
        if (*endpoint_opt) opts.gen_endpoint = gen_endpoint;
        if (*group_opt) opts.group_size = group_size;
        if (*turns_opt) opts.max_turns = max_turns;
        if (*seed_opt) opts.seed = seed;
        if (*groups_opt) opts.max_concurrent_groups = max_groups;
        const int code = toolforge::cli_rollout(opts, std::cerr);
        if (code == toolforge::kExitOk || code == toolforge::kExitBatchFailed) {
            std::cout << "wrote " << (std::filesystem::path(out) / "episodes.jsonl").string() << " and manifest.json\n";
        }
        return code;
    }

    if (serve->parsed()) {
        try {
            toolforge::MockOptions mock;
            mock.score = score;
            mock.delay = std::chrono::milliseconds(delay_ms);
            if (*reply_opt) mock.reply = reply;
            toolforge::MockServer server(toolforge::mock_kind_from_string(kind), port, mock);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "serving " << kind << " on " << server.url("") << std::endl;
            server.wait();
            g_server = nullptr;
        } catch (const toolforge::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return toolforge::kExitConfigError;
        }
        return 0;
    }

    if (summary_cmd->parsed()) {
        try {
            const auto summary = toolforge::summarize(run_dir);
            std::cout << "episodes:      " << summary.at("episodes") << "\n"
                      << "mean reward:   " << summary.at("mean_reward") << "\n"
                      << "mean turns:    " << summary.at("mean_turns") << "\n";
            if (summary.contains("episodes_per_minute")) {
                std::cout << "episodes/min:  " << summary.at("episodes_per_minute") << "\n";
            }
            std::cout << summary.dump(2) << "\n";
        } catch (const toolforge::EmptyRun& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        } catch (const toolforge::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return toolforge::kExitConfigError;
        }
        return 0;
    }
    return 0;
}
