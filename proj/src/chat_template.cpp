#include "toolforge/chat_template.hpp"

#include "toolforge/errors.hpp"

namespace toolforge {
namespace {

constexpr std::string_view kContent = "{content}";

std::string fill(const std::string& block, std::string_view content) {
    const auto pos = block.find(kContent);
    std::string out;
    out.reserve(block.size() + content.size());
    out.append(block, 0, pos);
    out.append(content);
    out.append(block, pos + kContent.size());
    return out;
}

void require_placeholder(const ChatTemplate& t, const std::string& block, std::string_view field) {
    if (block.find(kContent) == std::string::npos) {
        throw TemplateError("chat template '" + t.id + "': " + std::string(field) + " lacks {content} placeholder");
    }
}

}  // namespace

ChatTemplate ChatTemplate::qwen3() {
    ChatTemplate t;
    t.id = "qwen3";
    t.system = "You are a helpful assistant.";
    t.system_block = "<|im_start|>system\n{content}<|im_end|>\n";
    t.user_block = "<|im_start|>user\n{content}<|im_end|>\n";
    t.assistant_block = "<|im_start|>assistant\n{content}<|im_end|>\n";
    t.observation_block = "<|im_start|>user\n<tool_response>\n{content}\n</tool_response><|im_end|>\n";
    return t;
}

ChatTemplate ChatTemplate::plain() {
    ChatTemplate t;
    t.id = "plain";
    t.system = "You are a helpful assistant.";
    t.system_block = "System: {content}\n\n";
    t.user_block = "User: {content}\n\n";
    t.assistant_block = "Assistant: {content}\n\n";
    t.observation_block = "Tool: <tool_response>\n{content}\n</tool_response>\n\n";
    return t;
}

ChatTemplate ChatTemplate::by_id(std::string_view id) {
    if (id == "qwen3") return qwen3();
    if (id == "plain") return plain();
    throw TemplateError("unknown chat template id '" + std::string(id) + "'");
}

ChatTemplate ChatTemplate::from_json(const nlohmann::json& j) {
    ChatTemplate t = by_id(j.value("id", std::string("qwen3")));
    auto override_field = [&](const char* key, std::string& field) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_string()) throw TemplateError(std::string("chat template field '") + key + "' must be a string");
        field = j.at(key).get<std::string>();
    };
    override_field("system", t.system);
    override_field("system_block", t.system_block);
    override_field("user_block", t.user_block);
    override_field("assistant_block", t.assistant_block);
    override_field("observation_block", t.observation_block);
    t.validate();
    return t;
}

nlohmann::json ChatTemplate::to_json() const {
    return {{"id", id},
            {"system", system},
            {"system_block", system_block},
            {"user_block", user_block},
            {"assistant_block", assistant_block},
            {"observation_block", observation_block}};
}

void ChatTemplate::validate() const {
    require_placeholder(*this, system_block, "system_block");
    require_placeholder(*this, user_block, "user_block");
    require_placeholder(*this, assistant_block, "assistant_block");
    require_placeholder(*this, observation_block, "observation_block");
    const auto pos = observation_block.find(kContent);
    if (pos == 0 || pos + kContent.size() == observation_block.size()) {
        throw TemplateError("chat template '" + id + "': observation_block needs delimiters on both sides of {content}");
    }
}

std::string ChatTemplate::render_system() const {
    return system.empty() ? std::string() : fill(system_block, system);
}

std::string ChatTemplate::render_user(std::string_view content) const { return fill(user_block, content); }

std::string ChatTemplate::render_assistant(std::string_view content) const {
    return fill(assistant_block, content);
}

std::string ChatTemplate::render_observation(std::string_view content) const {
    return fill(observation_block, content);
}

ChatTemplate ChatTemplate::with_system_suffix(std::string_view extra) const {
    ChatTemplate t = *this;
    if (extra.empty()) return t;
    if (!t.system.empty()) t.system += "\n\n";
    t.system += extra;
    return t;
}

}  // namespace toolforge
