#pragma once

#include "toolforge/tool_registry.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace toolforge {

struct InvocationResult;

struct ToolCall {
    std::string tool_name;
    Arguments arguments = nlohmann::json::object();
    /// The matched region of the parsed response, delimiters included.
    std::string raw_text;

    /// Calls compare by name and arguments; raw_text is provenance only.
    bool operator==(const ToolCall& other) const {
        return tool_name == other.tool_name && arguments == other.arguments;
    }
};

struct ParsedCalls {
    std::vector<ToolCall> calls;  // never empty
};
struct ParsedTerminate {
    std::string final_answer;
};
struct ParsedMalformed {
    std::string reason;
};

using ParseOutcome = std::variant<ParsedCalls, ParsedTerminate, ParsedMalformed>;

/// A tool invocation grammar: how calls are written in model output and how
/// observation text is kept from being read back as a call.
class CallGrammar {
public:
    virtual ~CallGrammar() = default;

    virtual std::string_view id() const = 0;
    virtual ParseOutcome parse(std::string_view response) const = 0;
    virtual std::string format_call(const ToolCall& call) const = 0;
    /// Neutralizes every call delimiter occurring in `text`.
    virtual std::string escape(std::string_view text) const = 0;
    /// Removes call blocks, leaving the surrounding prose.
    virtual std::string strip_calls(std::string_view text) const = 0;
    /// True when `text` opens at least one call block.
    virtual bool mentions_call(std::string_view text) const = 0;
    /// Tool-use instructions appended to the system message.
    virtual std::string instructions(const Registry& registry) const = 0;
};

/// `<tool_call>{"name": ..., "arguments": {...}}</tool_call>` blocks.
class Qwen3Grammar final : public CallGrammar {
public:
    static constexpr std::string_view kOpen = "<tool_call>";
    static constexpr std::string_view kClose = "</tool_call>";

    std::string_view id() const override { return "qwen3"; }
    ParseOutcome parse(std::string_view response) const override;
    std::string format_call(const ToolCall& call) const override;
    std::string escape(std::string_view text) const override;
    std::string strip_calls(std::string_view text) const override;
    bool mentions_call(std::string_view text) const override;
    std::string instructions(const Registry& registry) const override;
};

/// Grammar by config id (`parser.grammar`). Throws ConfigParseError on unknown ids.
std::shared_ptr<const CallGrammar> make_grammar(std::string_view id);

/// Parses with the default grammar.
ParseOutcome parse_response(std::string_view response);
ParseOutcome parse_response(std::string_view response, const CallGrammar& grammar);

/// Serializes a call in the default grammar.
std::string format_call(const ToolCall& call);

/// Observation text for one invocation: `[tool] payload` on success,
/// `[tool] error (<status>): reason` otherwise. Call delimiters in the
/// payload are escaped.
std::string format_observation(const ToolCall& call, const InvocationResult& result);
std::string format_observation(const ToolCall& call, const InvocationResult& result, const CallGrammar& grammar);

/// Error observation fed back after a malformed call block.
std::string format_parse_error(std::string_view reason, const CallGrammar& grammar);

}  // namespace toolforge
