#include "toolforge/trajectory.hpp"

#include "toolforge/chat_template.hpp"
#include "toolforge/errors.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace toolforge {

std::string_view to_string(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::Prompt: return "Prompt";
        case SegmentKind::ModelText: return "ModelText";
        case SegmentKind::Observation: return "Observation";
    }
    return "?";
}

std::string_view to_string(TerminalReason reason) {
    switch (reason) {
        case TerminalReason::AnswerProduced: return "AnswerProduced";
        case TerminalReason::MaxTurnsReached: return "MaxTurnsReached";
        case TerminalReason::ToolFailureAbort: return "ToolFailureAbort";
        case TerminalReason::ParseFailureAbort: return "ParseFailureAbort";
    }
    return "?";
}

SegmentKind segment_kind_from_string(std::string_view s) {
    if (s == "Prompt") return SegmentKind::Prompt;
    if (s == "ModelText") return SegmentKind::ModelText;
    if (s == "Observation") return SegmentKind::Observation;
    throw Error("unknown span kind '" + std::string(s) + "'");
}

TerminalReason terminal_reason_from_string(std::string_view s) {
    if (s == "AnswerProduced") return TerminalReason::AnswerProduced;
    if (s == "MaxTurnsReached") return TerminalReason::MaxTurnsReached;
    if (s == "ToolFailureAbort") return TerminalReason::ToolFailureAbort;
    if (s == "ParseFailureAbort") return TerminalReason::ParseFailureAbort;
    throw Error("unknown terminal reason '" + std::string(s) + "'");
}

std::size_t whitespace_token_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

const Tokenizer& default_tokenizer() {
    static const Tokenizer tokenizer = whitespace_token_count;
    return tokenizer;
}

std::size_t Trajectory::total_tokens() const {
    return std::accumulate(spans.begin(), spans.end(), std::size_t{0},
                           [](std::size_t acc, const Span& s) { return acc + s.token_count; });
}

std::size_t Trajectory::model_turns() const {
    return static_cast<std::size_t>(std::count_if(spans.begin(), spans.end(),
                                                  [](const Span& s) { return s.kind == SegmentKind::ModelText; }));
}

std::size_t LossMask::ones() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

namespace {

// Returns an error message when `kind@turn` may not follow `spans`.
std::optional<std::string> order_error(const std::vector<Span>& spans, SegmentKind kind, std::size_t turn) {
    if (spans.empty()) {
        if (kind != SegmentKind::Prompt) return "first span must be a Prompt";
        return std::nullopt;
    }
    const Span& last = spans.back();
    if (turn < last.turn) {
        return "turn decreases from " + std::to_string(last.turn) + " to " + std::to_string(turn);
    }
    switch (kind) {
        case SegmentKind::Prompt:
            return "Prompt span is only allowed first";
        case SegmentKind::ModelText: {
            auto prev = std::find_if(spans.rbegin(), spans.rend(),
                                     [](const Span& s) { return s.kind == SegmentKind::ModelText; });
            if (prev != spans.rend() && prev->turn >= turn) {
                return "ModelText at turn " + std::to_string(turn) + " does not open a new turn";
            }
            return std::nullopt;
        }
        case SegmentKind::Observation:
            if (last.kind == SegmentKind::Prompt) return "Observation with no preceding ModelText";
            if (last.turn != turn) {
                return "Observation at turn " + std::to_string(turn) + " follows a span of turn " +
                       std::to_string(last.turn);
            }
            return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

Trajectory append_span(const Trajectory& traj, SegmentKind kind, std::string text, std::size_t turn,
                       const Tokenizer& tokenizer) {
    if (auto err = order_error(traj.spans, kind, turn)) throw OrderViolation(*err);
    Trajectory next = traj;
    const std::size_t count = tokenizer(text);
    next.spans.push_back(Span{kind, std::move(text), count, turn});
    return next;
}

LossMask loss_mask(const Trajectory& traj) {
    LossMask mask;
    mask.flags.reserve(traj.total_tokens());
    for (const Span& span : traj.spans) {
        const std::uint8_t flag = span.kind == SegmentKind::ModelText ? 1 : 0;
        mask.flags.insert(mask.flags.end(), span.token_count, flag);
    }
    return mask;
}

std::string render_context(const Trajectory& traj, const ChatTemplate& tmpl) {
    tmpl.validate();
    std::string out = tmpl.render_system();
    for (const Span& span : traj.spans) {
        switch (span.kind) {
            case SegmentKind::Prompt: out += tmpl.render_user(span.text); break;
            case SegmentKind::ModelText: out += tmpl.render_assistant(span.text); break;
            case SegmentKind::Observation: out += tmpl.render_observation(span.text); break;
        }
    }
    return out;
}

std::string render_transcript(const Trajectory& traj) {
    std::string out;
    for (const Span& span : traj.spans) {
        switch (span.kind) {
            case SegmentKind::Prompt: out += "[user]\n"; break;
            case SegmentKind::ModelText: out += "[assistant]\n"; break;
            case SegmentKind::Observation: out += "[tool]\n"; break;
        }
        out += span.text;
        out += "\n\n";
    }
    return out;
}

std::optional<std::string> check_invariants(const Trajectory& traj, const Tokenizer& tokenizer) {
    std::vector<Span> prefix;
    prefix.reserve(traj.spans.size());
    for (std::size_t i = 0; i < traj.spans.size(); ++i) {
        const Span& span = traj.spans[i];
        if (auto err = order_error(prefix, span.kind, span.turn)) {
            return "span " + std::to_string(i) + ": " + *err;
        }
        if (tokenizer(span.text) != span.token_count) {
            return "span " + std::to_string(i) + ": token_count does not match its text";
        }
        prefix.push_back(span);
    }
    if (traj.spans.empty()) return "trajectory has no spans";
    if (traj.terminal == TerminalReason::AnswerProduced && !traj.final_answer) {
        return "AnswerProduced without final_answer";
    }
    return std::nullopt;
}

}  // namespace toolforge
