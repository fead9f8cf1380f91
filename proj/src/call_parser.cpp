#include "toolforge/call_parser.hpp"

#include "toolforge/errors.hpp"
#include "toolforge/invoker.hpp"

namespace toolforge {
namespace {

constexpr std::string_view kEscapedOpen = "&lt;tool_call&gt;";
constexpr std::string_view kEscapedClose = "&lt;/tool_call&gt;";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// Accepts {"name": str, "arguments": object | json-string-of-object}.
std::optional<std::string> read_call_body(std::string_view body, ToolCall& call) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        return "call block is not valid JSON";
    }
    if (!j.is_object()) return "call block is not a JSON object";
    if (!j.contains("name") || !j.at("name").is_string()) return "call block lacks a string \"name\"";
    call.tool_name = j.at("name").get<std::string>();
    if (call.tool_name.empty()) return "call block has an empty \"name\"";
    if (!j.contains("arguments")) {
        call.arguments = nlohmann::json::object();
        return std::nullopt;
    }
    nlohmann::json args = j.at("arguments");
    if (args.is_string()) {
        try {
            args = nlohmann::json::parse(args.get<std::string>());
        } catch (const nlohmann::json::parse_error&) {
            return "\"arguments\" string is not valid JSON";
        }
    }
    if (!args.is_object()) return "\"arguments\" is not an object";
    call.arguments = std::move(args);
    return std::nullopt;
}

}  // namespace

ParseOutcome Qwen3Grammar::parse(std::string_view response) const {
    std::vector<ToolCall> calls;
    std::size_t pos = 0;
    while ((pos = response.find(kOpen, pos)) != std::string_view::npos) {
        const std::size_t body_start = pos + kOpen.size();
        const std::size_t close = response.find(kClose, body_start);
        if (close == std::string_view::npos) return ParsedMalformed{"unclosed call block"};
        ToolCall call;
        if (auto err = read_call_body(response.substr(body_start, close - body_start), call)) {
            return ParsedMalformed{*err};
        }
        const std::size_t end = close + kClose.size();
        call.raw_text = std::string(response.substr(pos, end - pos));
        calls.push_back(std::move(call));
        pos = end;
    }
    if (calls.empty()) return ParsedTerminate{std::string(response)};
    return ParsedCalls{std::move(calls)};
}

std::string Qwen3Grammar::format_call(const ToolCall& call) const {
    const nlohmann::json body = {{"name", call.tool_name}, {"arguments", call.arguments}};
    std::string json = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    // '<' only occurs inside JSON strings, so this keeps delimiters out of the body.
    replace_all(json, "<", "\\u003c");
    return std::string(kOpen) + "\n" + json + "\n" + std::string(kClose);
}

std::string Qwen3Grammar::escape(std::string_view text) const {
    std::string out(text);
    replace_all(out, kOpen, kEscapedOpen);
    replace_all(out, kClose, kEscapedClose);
    return out;
}

std::string Qwen3Grammar::strip_calls(std::string_view text) const {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find(kOpen, pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        const std::size_t close = text.find(kClose, open + kOpen.size());
        if (close == std::string_view::npos) break;
        pos = close + kClose.size();
    }
    return trim(out);
}

bool Qwen3Grammar::mentions_call(std::string_view text) const { return text.find(kOpen) != std::string_view::npos; }

std::string Qwen3Grammar::instructions(const Registry& registry) const {
    std::string out =
        "# Tools\n\nYou may call one or more functions to assist with the user query.\n\n"
        "You are provided with function signatures within <tools></tools> XML tags:\n<tools>";
    for (const auto& spec : registry.tools()) {
        out += "\n";
        out += spec.function_schema().dump();
    }
    out +=
        "\n</tools>\n\nFor each function call, return a json object with function name and arguments "
        "within <tool_call></tool_call> XML tags:\n<tool_call>\n"
        "{\"name\": <function-name>, \"arguments\": <args-json-object>}\n</tool_call>";
    return out;
}

std::shared_ptr<const CallGrammar> make_grammar(std::string_view id) {
    if (id == "qwen3") return std::make_shared<Qwen3Grammar>();
    throw ConfigParseError("parser.grammar: unknown grammar '" + std::string(id) + "'");
}

namespace {
const Qwen3Grammar& default_grammar() {
    static const Qwen3Grammar grammar;
    return grammar;
}
}  // namespace

ParseOutcome parse_response(std::string_view response) { return default_grammar().parse(response); }

ParseOutcome parse_response(std::string_view response, const CallGrammar& grammar) { return grammar.parse(response); }

std::string format_call(const ToolCall& call) { return default_grammar().format_call(call); }

std::string format_observation(const ToolCall& call, const InvocationResult& result) {
    return format_observation(call, result, default_grammar());
}

std::string format_observation(const ToolCall& call, const InvocationResult& result, const CallGrammar& grammar) {
    std::string out = "[" + grammar.escape(call.tool_name) + "] ";
    if (result.ok()) {
        out += grammar.escape(result.payload);
    } else {
        out += "error (" + std::string(to_string(result.status)) + "): " + grammar.escape(result.payload);
    }
    return out;
}

std::string format_parse_error(std::string_view reason, const CallGrammar& grammar) {
    return "[parser] error (malformed_call): " + grammar.escape(reason) +
           ". Emit a well-formed call block or give the final answer.";
}

}  // namespace toolforge
