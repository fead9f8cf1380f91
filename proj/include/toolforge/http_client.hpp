#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace toolforge::http {

struct Url {
    std::string host;
    int port = 80;
    std::string path = "/";
};

/// Parses `http://host[:port][/path]`. Returns nullopt for anything else.
std::optional<Url> parse_url(std::string_view url);

struct Response {
    /// Set when no HTTP response was received (refused, reset, timed out).
    std::optional<std::string> transport_error;
    bool timed_out = false;
    int status = 0;
    std::string body;

    bool success() const { return !transport_error && status >= 200 && status < 300; }
};

/// Blocking JSON POST; connect/read/write timeouts are all `timeout`.
Response post_json(std::string_view url, const nlohmann::json& body, std::chrono::milliseconds timeout);

/// OpenAI-style chat-completion request body.
nlohmann::json chat_request(const std::string& model, const nlohmann::json& messages,
                            std::optional<double> temperature = std::nullopt,
                            std::optional<int> max_tokens = std::nullopt,
                            std::optional<std::uint64_t> seed = std::nullopt);

/// `choices[0].message.content` of a chat-completion response body, or
/// nullopt when the body is not one.
std::optional<std::string> chat_content(std::string_view body);

/// Chat-completion response body wrapping `content`.
nlohmann::json chat_response(std::string_view content, std::string_view model = "mock");

/// Content of the last user message of a chat-completion request.
std::optional<std::string> last_user_message(const nlohmann::json& request);

}  // namespace toolforge::http
