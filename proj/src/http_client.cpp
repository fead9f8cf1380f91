#include "toolforge/http_client.hpp"

#include "httplib.h"

#include <charconv>

namespace toolforge::http {

std::optional<Url> parse_url(std::string_view url) {
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme) return std::nullopt;
    std::string_view rest = url.substr(scheme.size());
    Url out;
    const auto slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    if (slash != std::string_view::npos) out.path = std::string(rest.substr(slash));
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
        std::string_view port = authority.substr(colon + 1);
        int value = 0;
        auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
        if (ec != std::errc() || ptr != port.data() + port.size() || value <= 0 || value > 65535) return std::nullopt;
        out.port = value;
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) return std::nullopt;
    out.host = std::string(authority);
    return out;
}

Response post_json(std::string_view url, const nlohmann::json& body, std::chrono::milliseconds timeout) {
    Response resp;
    const auto parsed = parse_url(url);
    if (!parsed) {
        resp.transport_error = "unsupported url '" + std::string(url) + "'";
        return resp;
    }
    httplib::Client client(parsed->host, parsed->port);
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
    client.set_connection_timeout(sec.count(), usec.count());
    client.set_read_timeout(sec.count(), usec.count());
    client.set_write_timeout(sec.count(), usec.count());
    client.set_keep_alive(false);

    auto result = client.Post(parsed->path, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                              "application/json");
    if (!result) {
        const auto err = result.error();
        resp.timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
        resp.transport_error = httplib::to_string(err);
        return resp;
    }
    resp.status = result->status;
    resp.body = result->body;
    return resp;
}

nlohmann::json chat_request(const std::string& model, const nlohmann::json& messages, std::optional<double> temperature,
                            std::optional<int> max_tokens, std::optional<std::uint64_t> seed) {
    nlohmann::json req = {{"model", model}, {"messages", messages}};
    if (temperature) req["temperature"] = *temperature;
    if (max_tokens) req["max_tokens"] = *max_tokens;
    if (seed) req["seed"] = *seed;
    return req;
}

std::optional<std::string> chat_content(std::string_view body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        return std::nullopt;
    }
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) return std::nullopt;
    const auto& choice = j["choices"][0];
    if (!choice.is_object() || !choice.contains("message")) return std::nullopt;
    const auto& message = choice["message"];
    if (!message.is_object() || !message.contains("content") || !message["content"].is_string()) return std::nullopt;
    return message["content"].get<std::string>();
}

nlohmann::json chat_response(std::string_view content, std::string_view model) {
    return {{"object", "chat.completion"},
            {"model", model},
            {"choices",
             nlohmann::json::array({{{"index", 0},
                                     {"message", {{"role", "assistant"}, {"content", content}}},
                                     {"finish_reason", "stop"}}})}};
}

std::optional<std::string> last_user_message(const nlohmann::json& request) {
    if (!request.is_object() || !request.contains("messages") || !request["messages"].is_array()) return std::nullopt;
    const auto& messages = request["messages"];
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->is_object() && it->value("role", "") == "user" && it->contains("content") && (*it)["content"].is_string()) {
            return (*it)["content"].get<std::string>();
        }
    }
    return std::nullopt;
}

}  // namespace toolforge::http
