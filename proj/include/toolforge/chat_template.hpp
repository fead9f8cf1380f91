#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace toolforge {

/// Chat template as data. Each block is a format string holding a single
/// `{content}` placeholder.
class ChatTemplate {
public:
    std::string id;
    std::string system;  // system message text; empty means no system block
    std::string system_block;
    std::string user_block;
    std::string assistant_block;
    std::string observation_block;

    /// Qwen3-style `<|im_start|>` roles with `<tool_response>` observations.
    static ChatTemplate qwen3();
    /// Role-prefixed plain text with `<tool_response>` observations.
    static ChatTemplate plain();
    /// Built-in template by id ("qwen3" or "plain"); TemplateError otherwise.
    static ChatTemplate by_id(std::string_view id);

    /// Built-in template from `{"id": ...}` with optional per-field overrides.
    static ChatTemplate from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// Throws TemplateError when a block lacks its `{content}` placeholder or
    /// the observation block carries no delimiters around it.
    void validate() const;

    std::string render_system() const;
    std::string render_user(std::string_view content) const;
    std::string render_assistant(std::string_view content) const;
    std::string render_observation(std::string_view content) const;

    /// Copy whose system text is `system` followed by `extra` (blank line between).
    ChatTemplate with_system_suffix(std::string_view extra) const;
};

}  // namespace toolforge
