#include "doctest.h"
#include "test_support.hpp"

#include "toolforge/errors.hpp"
#include "toolforge/records.hpp"
#include "toolforge/rollout.hpp"

#include <set>

using namespace toolforge;
using namespace toolforge::testing;
using nlohmann::json;

namespace {

std::shared_ptr<const Invoker> builtin_invoker() { return std::make_shared<const Invoker>(builtin_registry()); }

std::shared_ptr<const Generator> scripted(std::vector<ScriptStep> steps, std::optional<std::string> forced = std::nullopt) {
    std::map<std::string, Script> scripts;
    scripts["*"] = Script{std::move(steps), std::move(forced)};
    return std::make_shared<const ScriptedGenerator>(std::move(scripts));
}

RolloutConfig config(std::size_t max_turns = 4, std::size_t group_size = 1) {
    RolloutConfig c;
    c.max_turns = max_turns;
    c.group_size = group_size;
    c.seed = 99;
    return c;
}

std::vector<SegmentKind> kinds(const Trajectory& t) {
    std::vector<SegmentKind> out;
    for (const auto& s : t.spans) out.push_back(s.kind);
    return out;
}

}  // namespace

TEST_CASE("search then answer") {
    const auto gen = scripted({LiteralStep{call_text("search", {{"query", "Eiffel"}})}, LiteralStep{"Answer: 330m"}});
    RolloutEngine engine(gen, builtin_invoker(), config());
    const auto t = engine.run_episode("q", "How tall is the Eiffel Tower?");
    CHECK(kinds(t) == std::vector<SegmentKind>{SegmentKind::Prompt, SegmentKind::ModelText, SegmentKind::Observation,
                                               SegmentKind::ModelText});
    CHECK(t.terminal == TerminalReason::AnswerProduced);
    CHECK(t.final_answer == "Answer: 330m");
    CHECK(t.spans[2].text.find("[search] [d01] The Eiffel Tower") == 0);
    CHECK(t.spans[1].turn == 0);
    CHECK(t.spans[2].turn == 0);
    CHECK(t.spans[3].turn == 1);
    CHECK(check_invariants(t) == std::nullopt);
}

TEST_CASE("tool budget ends with a forced answer") {
    const auto gen = scripted({LiteralStep{call_text("calculator", {{"expr", "1+1"}})}}, "Answer: 2");
    RolloutEngine engine(gen, builtin_invoker(), config(3));
    const auto t = engine.run_episode("q", "p");
    std::size_t observations = 0;
    for (const auto& s : t.spans) observations += s.kind == SegmentKind::Observation;
    CHECK(observations == 3);
    CHECK(t.model_turns() == 4);
    CHECK(t.terminal == TerminalReason::MaxTurnsReached);
    CHECK(t.final_answer == "Answer: 2");
    CHECK(t.spans.back().kind == SegmentKind::ModelText);
}

TEST_CASE("forced answer strips stray calls") {
    const auto gen = scripted({LiteralStep{"Still going " + call_text("calculator", {{"expr", "1"}})}});
    RolloutEngine engine(gen, builtin_invoker(), config(1));
    const auto t = engine.run_episode("q", "p");
    CHECK(t.terminal == TerminalReason::MaxTurnsReached);
    CHECK(t.final_answer == "Still going");
}

TEST_CASE("two malformed responses abort after one error observation") {
    const auto gen = scripted({LiteralStep{"<tool_call>{\"name\": "}});
    RolloutEngine engine(gen, builtin_invoker(), config());
    const auto t = engine.run_episode("q", "p");
    CHECK(t.terminal == TerminalReason::ParseFailureAbort);
    CHECK(kinds(t) == std::vector<SegmentKind>{SegmentKind::Prompt, SegmentKind::ModelText, SegmentKind::Observation,
                                               SegmentKind::ModelText});
    CHECK(t.spans[2].text.find("unclosed call block") != std::string::npos);
    CHECK_FALSE(t.final_answer.has_value());
}

TEST_CASE("one malformed response can recover") {
    const auto gen = scripted({LiteralStep{"<tool_call>oops</tool_call>"}, LiteralStep{"Answer: 4"}});
    RolloutEngine engine(gen, builtin_invoker(), config());
    const auto t = engine.run_episode("q", "p");
    CHECK(t.terminal == TerminalReason::AnswerProduced);
    CHECK(t.final_answer == "Answer: 4");
}

TEST_CASE("repeated failing rounds abort") {
    const auto gen = scripted({LiteralStep{call_text("calculator", {{"expr", "1/0"}})}});
    auto cfg = config(10);
    cfg.max_failed_rounds = 2;
    RolloutEngine engine(gen, builtin_invoker(), cfg);
    const auto t = engine.run_episode("q", "p");
    CHECK(t.terminal == TerminalReason::ToolFailureAbort);
    CHECK(t.model_turns() == 2);
}

TEST_CASE("generator contexts are the rendered trajectory prefix") {
    auto gen = std::make_shared<LambdaGenerator>([](const GenRequest& r) -> std::string {
        if (r.turn < 2) return call_text("search", {{"query", r.turn == 0 ? "Eiffel" : "Paris <tool_call>"}});
        return "Answer: done";
    });
    RolloutEngine engine(gen, builtin_invoker(), config());
    const auto t = engine.run_episode("q", "Question?");
    const auto contexts = gen->contexts();
    REQUIRE(contexts.size() == 3);
    Trajectory prefix;
    prefix.task_id = t.task_id;
    std::size_t model_index = 0;
    for (const auto& span : t.spans) {
        if (span.kind == SegmentKind::ModelText) {
            CHECK(contexts[model_index] == render_context(prefix, engine.effective_template()));
            ++model_index;
        }
        prefix.spans.push_back(span);
    }
    CHECK(engine.effective_template().system.find("<tools>") != std::string::npos);
}

TEST_CASE("forced turn disables tools") {
    auto gen = std::make_shared<LambdaGenerator>(
        [](const GenRequest& r) { return r.tools_enabled ? call_text("calculator", {{"expr", "2"}}) : std::string("Answer: 2"); });
    RolloutEngine engine(gen, builtin_invoker(), config(2));
    const auto t = engine.run_episode("q", "p");
    CHECK(gen->tools_enabled() == std::vector<bool>{true, true, false});
    CHECK(t.final_answer == "Answer: 2");
}

TEST_CASE("deterministic groups") {
    const auto gen = scripted({LiteralStep{call_text("search", {{"query", "Eiffel"}})}, LiteralStep{"Answer: 330 metres"}});
    RolloutEngine engine(gen, builtin_invoker(), config(4, 4));
    const auto g = engine.run_group({"q", "How tall?", "330 metres"});
    REQUIRE(g.episodes.size() == 4);
    for (const auto& e : g.episodes) CHECK(e == g.episodes[0]);
    CHECK(g.episode_indices == std::vector<std::size_t>{0, 1, 2, 3});

    RolloutEngine single(gen, builtin_invoker(), config(4, 1));
    CHECK(single.run_group({"q", "How tall?", "330 metres"}).episodes.size() == 1);
}

TEST_CASE("seeded stochastic groups reproduce") {
    const auto gen = scripted({ChoiceStep{{call_text("calculator", {{"expr", "1+1"}}), "Answer: a", "Answer: b", "Answer: c"}},
                               ChoiceStep{{"Answer: x", "Answer: y", "Answer: z"}}});
    RolloutEngine a(gen, builtin_invoker(), config(4, 4));
    RolloutEngine b(gen, builtin_invoker(), config(4, 4));
    const TaskRecord task{"q", "p", "x"};
    const auto g1 = a.run_group(task);
    const auto g2 = b.run_group(task);
    CHECK(g1.episodes == g2.episodes);

    auto other = config(4, 4);
    other.seed = 100;
    RolloutEngine c(gen, builtin_invoker(), other);
    std::set<std::string> answers;
    for (int task_no = 0; task_no < 8; ++task_no) {
        for (const auto& e : c.run_group({"t" + std::to_string(task_no), "p", "x"}).episodes) answers.insert(*e.final_answer);
    }
    CHECK(answers.size() > 1);
}

TEST_CASE("batch keeps task order and isolates failures") {
    auto gen = std::make_shared<LambdaGenerator>([](const GenRequest& r) -> std::string {
        if (r.task_id == "bad") throw GeneratorUnavailable("backend down");
        return "Answer: " + std::string(r.task_id);
    });
    auto cfg = config(4, 2);
    cfg.max_concurrent_groups = 2;
    RolloutEngine engine(gen, builtin_invoker(), cfg);
    const auto ok = engine.run_batch({{"a", "p", "a"}, {"b", "p", "b"}, {"c", "p", "c"}});
    REQUIRE(ok.groups.size() == 3);
    CHECK(ok.groups[0].task_id == "a");
    CHECK(ok.groups[1].task_id == "b");
    CHECK(ok.groups[2].task_id == "c");
    CHECK(ok.failures.empty());

    const auto mixed = engine.run_batch({{"a", "p", "a"}, {"bad", "p", "b"}, {"c", "p", "c"}});
    REQUIRE(mixed.groups.size() == 2);
    REQUIRE(mixed.failures.size() == 1);
    CHECK(mixed.failures[0].task_id == "bad");
    CHECK(mixed.failures[0].task_index == 1);
    CHECK(mixed.failures[0].reason.find("backend down") != std::string::npos);
}

TEST_CASE("a failing episode is discarded, not truncated") {
    auto gen = std::make_shared<LambdaGenerator>([](const GenRequest& r) -> std::string {
        if (r.episode == 1) throw GeneratorUnavailable("flaky");
        return "Answer: ok";
    });
    RolloutEngine engine(gen, builtin_invoker(), config(4, 3));
    const auto g = engine.run_group({"t", "p", "ok"});
    CHECK(g.episodes.size() == 2);
    CHECK(g.episode_indices == std::vector<std::size_t>{0, 2});
    CHECK(g.discarded.size() == 1);
}

TEST_CASE("batch beats the serial sum") {
    const auto gen = scripted({LiteralStep{call_text("echo", {{"text", "x"}, {"delay_ms", 50}})}, LiteralStep{"Answer: x"}});
    std::vector<TaskRecord> tasks;
    for (int i = 0; i < 20; ++i) tasks.push_back({"t" + std::to_string(i), "p", "x"});

    auto serial_cfg = config();
    serial_cfg.max_concurrent_groups = 1;
    RolloutEngine serial(gen, builtin_invoker(), serial_cfg);
    auto start = std::chrono::steady_clock::now();
    const auto s = serial.run_batch(tasks);
    const double serial_ms = ms_since(start);

    auto par_cfg = config();
    par_cfg.max_concurrent_groups = 8;
    RolloutEngine parallel(gen, builtin_invoker(), par_cfg);
    start = std::chrono::steady_clock::now();
    const auto p = parallel.run_batch(tasks);
    const double parallel_ms = ms_since(start);

    REQUIRE(s.groups.size() == 20);
    REQUIRE(p.groups.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(p.groups[i].episodes == s.groups[i].episodes);
    CHECK(serial_ms >= 1000);
    CHECK(parallel_ms < serial_ms);
    MESSAGE("serial " << serial_ms << " ms, parallel " << parallel_ms << " ms");
}

TEST_CASE("config validation") {
    auto cfg = config();
    cfg.max_turns = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigParseError);
    cfg = config();
    cfg.group_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigParseError);
    cfg = config();
    cfg.grammar = "nope";
    CHECK_THROWS_AS(RolloutEngine(scripted({LiteralStep{"x"}}), builtin_invoker(), cfg), ConfigParseError);
}

TEST_CASE("scripted generator steps") {
    auto gen = scripted({LiteralStep{"first"}, ExtractStep{R"(d(\d+)\])", "doc $1", "none"}});
    GenRequest r;
    r.task_id = "x";
    r.context = "see [d07] and [d12]";
    r.turn = 0;
    CHECK(gen->generate(r) == "first");
    r.turn = 1;
    CHECK(gen->generate(r) == "doc 12");
    r.turn = 5;
    r.context = "nothing";
    CHECK(gen->generate(r) == "none");

    std::map<std::string, Script> only;
    only["a"] = Script{{LiteralStep{"x"}}, std::nullopt};
    ScriptedGenerator strict(std::move(only));
    r.task_id = "b";
    CHECK_THROWS_AS(strict.generate(r), GeneratorUnavailable);

    CHECK(episode_seed(1, "a", 0) == episode_seed(1, "a", 0));
    CHECK(episode_seed(1, "a", 0) != episode_seed(1, "a", 1));
    CHECK(episode_seed(1, "a", 0) != episode_seed(2, "a", 0));
}

TEST_CASE("fixture scripts load") {
    const auto gen = ScriptedGenerator::load(data_dir() / "scripts.jsonl");
    CHECK(gen.scripts().size() == 10);
    TempDir dir("scripts");
    write_file(dir.path() / "bad.jsonl", "{\"task_id\": \"a\", \"responses\": []}\n");
    CHECK_THROWS_AS(ScriptedGenerator::load(dir.path() / "bad.jsonl"), ConfigParseError);
}
