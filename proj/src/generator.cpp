#include "toolforge/generator.hpp"

#include "toolforge/errors.hpp"
#include "toolforge/http_client.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <random>
#include <regex>

namespace toolforge {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

ScriptStep parse_step(const nlohmann::json& j, const std::string& where) {
    if (j.is_string()) return LiteralStep{j.get<std::string>()};
    if (!j.is_object()) throw ConfigParseError(where + ": step must be a string or object");
    if (j.contains("choices")) {
        const auto& c = j.at("choices");
        if (!c.is_array() || c.empty()) throw ConfigParseError(where + ".choices: expected nonempty array");
        ChoiceStep step;
        for (const auto& item : c) {
            if (!item.is_string()) throw ConfigParseError(where + ".choices: expected strings");
            step.choices.push_back(item.get<std::string>());
        }
        return step;
    }
    if (j.contains("extract")) {
        ExtractStep step;
        if (!j.at("extract").is_string()) throw ConfigParseError(where + ".extract: expected string");
        step.pattern = j.at("extract").get<std::string>();
        step.format = j.value("format", std::string("$1"));
        step.fallback = j.value("fallback", std::string());
        try {
            std::regex probe(step.pattern);
        } catch (const std::regex_error& e) {
            throw ConfigParseError(where + ".extract: bad regex: " + e.what());
        }
        return step;
    }
    throw ConfigParseError(where + ": step object needs \"choices\" or \"extract\"");
}

std::string play(const ScriptStep& step, const GenRequest& req) {
    if (const auto* lit = std::get_if<LiteralStep>(&step)) return lit->text;
    if (const auto* choice = std::get_if<ChoiceStep>(&step)) {
        std::mt19937_64 rng(splitmix64(req.seed ^ splitmix64(req.turn + 1)));
        std::uniform_int_distribution<std::size_t> pick(0, choice->choices.size() - 1);
        return choice->choices[pick(rng)];
    }
    const auto& ex = std::get<ExtractStep>(step);
    const std::regex re(ex.pattern);
    const std::string context(req.context);
    std::smatch last;
    bool found = false;
    for (auto it = std::sregex_iterator(context.begin(), context.end(), re); it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    return found ? last.format(ex.format) : ex.fallback;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t base_seed, std::string_view task_id, std::size_t episode) {
    return splitmix64(splitmix64(base_seed) ^ fnv1a(task_id) ^ splitmix64(0xE9150DEULL + episode));
}

ScriptedGenerator::ScriptedGenerator(std::map<std::string, Script> scripts) : scripts_(std::move(scripts)) {}

Script ScriptedGenerator::parse_script(const nlohmann::json& record, std::string_view where) {
    const std::string base(where);
    if (!record.is_object()) throw ConfigParseError(base + ": expected object");
    if (!record.contains("responses") || !record.at("responses").is_array() || record.at("responses").empty()) {
        throw ConfigParseError(base + ".responses: expected nonempty array");
    }
    Script script;
    const auto& responses = record.at("responses");
    for (std::size_t i = 0; i < responses.size(); ++i) {
        script.steps.push_back(parse_step(responses[i], base + ".responses[" + std::to_string(i) + "]"));
    }
    if (record.contains("forced_answer")) {
        if (!record.at("forced_answer").is_string()) throw ConfigParseError(base + ".forced_answer: expected string");
        script.forced_answer = record.at("forced_answer").get<std::string>();
    }
    return script;
}

ScriptedGenerator ScriptedGenerator::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError(path.string() + ": cannot open script file");
    std::map<std::string, Script> scripts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigParseError(where + ": " + e.what());
        }
        if (!record.is_object() || !record.contains("task_id") || !record.at("task_id").is_string()) {
            throw ConfigParseError(where + ": task_id: expected string");
        }
        std::string task_id = record.at("task_id").get<std::string>();
        if (scripts.count(task_id)) throw ConfigParseError(where + ": task_id '" + task_id + "' scripted twice");
        scripts.emplace(std::move(task_id), parse_script(record, where));
    }
    return ScriptedGenerator(std::move(scripts));
}

std::string ScriptedGenerator::generate(const GenRequest& request) const {
    auto it = scripts_.find(std::string(request.task_id));
    if (it == scripts_.end()) it = scripts_.find("*");
    if (it == scripts_.end()) {
        throw GeneratorUnavailable("no script for task '" + std::string(request.task_id) + "'");
    }
    const Script& script = it->second;
    if (!request.tools_enabled && script.forced_answer) return *script.forced_answer;
    const std::size_t index = std::min(request.turn, script.steps.size() - 1);
    return play(script.steps[index], request);
}

RemoteGenerator::RemoteGenerator(RemoteGeneratorConfig config) : config_(std::move(config)) {
    if (!http::parse_url(config_.endpoint)) {
        throw ConfigParseError("generator endpoint '" + config_.endpoint + "' is not an http:// url");
    }
}

std::string RemoteGenerator::generate(const GenRequest& request) const {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "user"}, {"content", request.context}});
    if (!request.tools_enabled) messages.push_back({{"role", "system"}, {"content", kForcedAnswerNote}});
    const auto body = http::chat_request(config_.model, messages, request.params.temperature,
                                         request.params.max_new_tokens, request.seed);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        const auto resp = http::post_json(config_.endpoint, body, std::chrono::milliseconds(config_.timeout_ms));
        if (resp.transport_error) {
            last_error = *resp.transport_error;
        } else if (!resp.success()) {
            last_error = "http status " + std::to_string(resp.status);
        } else if (auto content = http::chat_content(resp.body)) {
            return *content;
        } else {
            last_error = "unparseable response";
        }
        spdlog::debug("generator attempt {} for task {} failed: {}", attempt + 1, request.task_id, last_error);
    }
    throw GeneratorUnavailable("generator at " + config_.endpoint + " failed after " +
                               std::to_string(config_.retries + 1) + " attempt(s): " + last_error);
}

}  // namespace toolforge
