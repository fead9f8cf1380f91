#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toolforge {

class ChatTemplate;

enum class SegmentKind { Prompt, ModelText, Observation };

enum class TerminalReason { AnswerProduced, MaxTurnsReached, ToolFailureAbort, ParseFailureAbort };

std::string_view to_string(SegmentKind kind);
std::string_view to_string(TerminalReason reason);
SegmentKind segment_kind_from_string(std::string_view s);
TerminalReason terminal_reason_from_string(std::string_view s);

/// Counts tokens in a piece of text. The engine only needs counts, never ids.
using Tokenizer = std::function<std::size_t(std::string_view)>;

/// Number of maximal runs of non-whitespace characters.
std::size_t whitespace_token_count(std::string_view text);

/// The default tokenization rule (whitespace-delimited units).
const Tokenizer& default_tokenizer();

struct Span {
    SegmentKind kind = SegmentKind::Prompt;
    std::string text;
    std::size_t token_count = 0;
    std::size_t turn = 0;

    bool operator==(const Span&) const = default;
};

/// One episode: interleaved prompt, model and observation spans.
///
/// Values are built through append_span(), which returns a new trajectory and
/// never touches the spans already present.
struct Trajectory {
    std::string task_id;
    std::vector<Span> spans;
    std::optional<TerminalReason> terminal;
    std::optional<std::string> final_answer;

    bool operator==(const Trajectory&) const = default;

    std::size_t total_tokens() const;
    /// Number of ModelText spans (generation turns).
    std::size_t model_turns() const;
};

/// Per-token flags over the flattened trajectory; 1 marks a model-generated
/// position that takes part in the policy loss.
struct LossMask {
    std::vector<std::uint8_t> flags;

    std::size_t ones() const;
    bool operator==(const LossMask&) const = default;
};

/// Returns `traj` extended by one span. Throws OrderViolation when the span
/// would break the ordering rules:
///   - the first span is a Prompt and no other span is;
///   - turns never decrease and each ModelText opens a new turn;
///   - an Observation belongs to the turn of the ModelText right before it.
Trajectory append_span(const Trajectory& traj, SegmentKind kind, std::string text, std::size_t turn,
                       const Tokenizer& tokenizer = default_tokenizer());

LossMask loss_mask(const Trajectory& traj);

/// Full conversation rendering: system + prompt, then every model turn and
/// every observation wrapped in the template's tool-response block.
std::string render_context(const Trajectory& traj, const ChatTemplate& tmpl);

/// Role-labelled plain rendering used when a trajectory is shown to a judge.
std::string render_transcript(const Trajectory& traj);

/// Checks every trajectory invariant, including tokenization consistency.
/// Returns a description of the first violation, or nullopt.
std::optional<std::string> check_invariants(const Trajectory& traj,
                                            const Tokenizer& tokenizer = default_tokenizer());

}  // namespace toolforge
