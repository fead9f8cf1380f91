#include "doctest.h"
#include "test_support.hpp"

#include "toolforge/chat_template.hpp"
#include "toolforge/errors.hpp"
#include "toolforge/records.hpp"

using namespace toolforge;
using namespace toolforge::testing;

namespace {

std::string words(std::size_t n, const std::string& w = "w") {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + w;
    return out;
}

}  // namespace

TEST_CASE("append_span builds trajectories in order") {
    Trajectory t;
    t = append_span(t, SegmentKind::Prompt, "Q: capital of France?", 0);
    REQUIRE(t.spans.size() == 1);
    CHECK(t.spans[0].kind == SegmentKind::Prompt);
    CHECK(t.spans[0].token_count == 4);

    CHECK_THROWS_AS(append_span(t, SegmentKind::Observation, "...", 0), OrderViolation);

    auto t2 = append_span(t, SegmentKind::ModelText, "call", 0);
    auto t3 = append_span(t2, SegmentKind::Observation, "result", 0);
    CHECK(t3.spans.size() == 3);
    // earlier values are untouched
    CHECK(t.spans.size() == 1);
    CHECK(t2.spans.size() == 2);
}

TEST_CASE("append_span rejects ordering violations") {
    Trajectory empty;
    CHECK_THROWS_AS(append_span(empty, SegmentKind::ModelText, "x", 0), OrderViolation);
    CHECK_THROWS_AS(append_span(empty, SegmentKind::Observation, "x", 0), OrderViolation);

    auto t = append_span(empty, SegmentKind::Prompt, "p", 0);
    CHECK_THROWS_AS(append_span(t, SegmentKind::Prompt, "again", 0), OrderViolation);

    t = append_span(t, SegmentKind::ModelText, "a", 1);
    CHECK_THROWS_AS(append_span(t, SegmentKind::ModelText, "b", 1), OrderViolation);  // same turn
    CHECK_THROWS_AS(append_span(t, SegmentKind::ModelText, "b", 0), OrderViolation);  // decreasing
    CHECK_THROWS_AS(append_span(t, SegmentKind::Observation, "o", 2), OrderViolation);  // other turn
    t = append_span(t, SegmentKind::Observation, "o1", 1);
    t = append_span(t, SegmentKind::Observation, "o2", 1);
    t = append_span(t, SegmentKind::ModelText, "c", 2);
    CHECK(check_invariants(t) == std::nullopt);
}

TEST_CASE("loss mask examples") {
    Trajectory t;
    t = append_span(t, SegmentKind::Prompt, words(5), 0);
    t = append_span(t, SegmentKind::ModelText, words(3), 0);
    t = append_span(t, SegmentKind::Observation, words(4), 0);
    t = append_span(t, SegmentKind::ModelText, words(2), 1);
    const std::vector<std::uint8_t> expected = {0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1};
    CHECK(loss_mask(t).flags == expected);
    CHECK(loss_mask(t) == loss_mask(t));

    Trajectory p = append_span(Trajectory{}, SegmentKind::Prompt, words(7), 0);
    CHECK(loss_mask(p).flags == std::vector<std::uint8_t>(7, 0));
}

TEST_CASE("loss mask of a 10-turn episode matches a per-span count") {
    Trajectory t = append_span(Trajectory{}, SegmentKind::Prompt, "Find the height of every tower listed", 0);
    std::size_t model_tokens = 0;
    for (std::size_t turn = 0; turn < 10; ++turn) {
        const std::string model = words(turn + 1, "tok");
        model_tokens += turn + 1;
        t = append_span(t, SegmentKind::ModelText, model, turn);
        t = append_span(t, SegmentKind::Observation, words(2 * turn + 3, "obs"), turn);
    }
    const auto mask = loss_mask(t);
    CHECK(mask.ones() == model_tokens);
    CHECK(mask.ones() == 55);
    CHECK(mask.flags == span_walk_mask(t));
    CHECK(mask.flags.size() == t.total_tokens());
}

TEST_CASE("custom tokenizer drives token counts") {
    Tokenizer chars = [](std::string_view s) { return s.size(); };
    Trajectory t = append_span(Trajectory{}, SegmentKind::Prompt, "abc", 0, chars);
    t = append_span(t, SegmentKind::ModelText, "de", 0, chars);
    CHECK(loss_mask(t).flags == std::vector<std::uint8_t>{0, 0, 0, 1, 1});
    CHECK(check_invariants(t, chars) == std::nullopt);
    CHECK(check_invariants(t) != std::nullopt);
}

TEST_CASE("whitespace tokenizer") {
    CHECK(whitespace_token_count("") == 0);
    CHECK(whitespace_token_count("   \n\t") == 0);
    CHECK(whitespace_token_count("a") == 1);
    CHECK(whitespace_token_count("  a  b\nc\t") == 3);
}

TEST_CASE("render_context of a prompt-only trajectory") {
    const auto tmpl = ChatTemplate::qwen3();
    Trajectory t = append_span(Trajectory{}, SegmentKind::Prompt, "How tall is it?", 0);
    CHECK(render_context(t, tmpl) ==
          "<|im_start|>system\nYou are a helpful assistant.<|im_end|>\n"
          "<|im_start|>user\nHow tall is it?<|im_end|>\n");
}

TEST_CASE("render_context golden with one tool round") {
    Trajectory t = append_span(Trajectory{}, SegmentKind::Prompt, "How tall is the Eiffel Tower?", 0);
    t = append_span(t, SegmentKind::ModelText, call_text("search", {{"query", "Eiffel height"}}), 0);
    t = append_span(t, SegmentKind::Observation, "[search] [d01] The Eiffel Tower is 330 metres tall.", 0);
    t = append_span(t, SegmentKind::ModelText, "Answer: 330 metres", 1);
    const auto rendered = render_context(t, ChatTemplate::qwen3());
    CHECK(rendered == read_file(golden_dir() / "render_qwen3.txt"));
    CHECK(rendered.find("<tool_response>\n[search] [d01] The Eiffel Tower is 330 metres tall.\n</tool_response>") !=
          std::string::npos);
}

TEST_CASE("render_context prefix property") {
    std::mt19937_64 rng(11);
    const auto tmpl = ChatTemplate::plain();
    for (int i = 0; i < 200; ++i) {
        const auto t = random_trajectory(rng);
        Trajectory prefix;
        prefix.task_id = t.task_id;
        std::string previous;
        for (const auto& span : t.spans) {
            prefix.spans.push_back(span);
            const auto now = render_context(prefix, tmpl);
            REQUIRE(now.compare(0, previous.size(), previous) == 0);
            previous = now;
        }
    }
}

TEST_CASE("render_context rejects a template without delimiters") {
    auto tmpl = ChatTemplate::qwen3();
    tmpl.observation_block = "{content}";
    Trajectory t = append_span(Trajectory{}, SegmentKind::Prompt, "p", 0);
    CHECK_THROWS_AS(render_context(t, tmpl), TemplateError);
    tmpl = ChatTemplate::qwen3();
    tmpl.user_block = "<|im_start|>user\n";
    CHECK_THROWS_AS(render_context(t, tmpl), TemplateError);
}

TEST_CASE("chat template config round trip") {
    const auto t = ChatTemplate::from_json({{"id", "plain"}, {"system", "Be brief."}});
    CHECK(t.id == "plain");
    CHECK(t.system == "Be brief.");
    CHECK(ChatTemplate::from_json(t.to_json()).to_json() == t.to_json());
    CHECK_THROWS_AS(ChatTemplate::by_id("llama"), TemplateError);
    CHECK_THROWS_AS(ChatTemplate::from_json({{"id", "qwen3"}, {"assistant_block", "no placeholder"}}), TemplateError);
}

TEST_CASE("random trajectories keep their invariants") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        const auto t = random_trajectory(rng);
        REQUIRE(check_invariants(t) == std::nullopt);
        const auto mask = loss_mask(t);
        REQUIRE(mask.flags.size() == t.total_tokens());
        REQUIRE(mask.flags == span_walk_mask(t));
        REQUIRE(trajectory_from_json(trajectory_to_json(t)) == t);
    }
}

TEST_CASE("check_invariants reports hand-built violations") {
    Trajectory t = append_span(Trajectory{}, SegmentKind::Prompt, "a b", 0);
    t.spans[0].token_count = 5;
    CHECK(check_invariants(t) != std::nullopt);

    Trajectory u = append_span(Trajectory{}, SegmentKind::Prompt, "a", 0);
    u.spans.push_back({SegmentKind::Observation, "o", 1, 0});
    CHECK(check_invariants(u) != std::nullopt);
}

TEST_CASE("render_transcript labels roles") {
    Trajectory t = append_span(Trajectory{}, SegmentKind::Prompt, "q", 0);
    t = append_span(t, SegmentKind::ModelText, "m", 0);
    t = append_span(t, SegmentKind::Observation, "o", 0);
    const auto s = render_transcript(t);
    CHECK(s.find("[user]") < s.find("[assistant]"));
    CHECK(s.find("[assistant]") < s.find("[tool]"));
}
