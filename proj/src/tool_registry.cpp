#include "toolforge/tool_registry.hpp"

#include "toolforge/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace toolforge {

std::string_view to_string(ToolKind kind) {
    switch (kind) {
        case ToolKind::Program: return "program";
        case ToolKind::Model: return "model";
        case ToolKind::Agent: return "agent";
    }
    return "?";
}

std::string_view to_string(ValueType type) {
    switch (type) {
        case ValueType::String: return "string";
        case ValueType::Number: return "number";
        case ValueType::Boolean: return "boolean";
        case ValueType::Array: return "array";
    }
    return "?";
}

namespace {

constexpr std::string_view kBuiltinPrefix = "builtin:";
constexpr std::string_view kAgentPrefix = "agent:";

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool matches_type(const nlohmann::json& v, ValueType type) {
    switch (type) {
        case ValueType::String: return v.is_string();
        case ValueType::Number: return v.is_number();
        case ValueType::Boolean: return v.is_boolean();
        case ValueType::Array: return v.is_array();
    }
    return false;
}

std::string json_type_name(const nlohmann::json& v) { return v.type_name(); }

// Config-parse helpers: every failure names the source file and field path.
struct FieldReader {
    std::string_view source;

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw ConfigParseError(std::string(source) + ": " + field + ": " + what);
    }

    const nlohmann::json& require(const nlohmann::json& obj, const std::string& path, const char* key) const {
        if (!obj.is_object() || !obj.contains(key)) fail(path + "." + key, "missing");
        return obj.at(key);
    }

    std::string string_field(const nlohmann::json& obj, const std::string& path, const char* key) const {
        const auto& v = require(obj, path, key);
        if (!v.is_string()) fail(path + "." + key, "expected string, got " + json_type_name(v));
        return v.get<std::string>();
    }
};

ValueType value_type_from(const FieldReader& r, const std::string& path, const std::string& s) {
    if (s == "string") return ValueType::String;
    if (s == "number") return ValueType::Number;
    if (s == "boolean") return ValueType::Boolean;
    if (s == "array") return ValueType::Array;
    r.fail(path, "unknown type '" + s + "' (expected string|number|boolean|array)");
}

ToolKind tool_kind_from(const FieldReader& r, const std::string& path, const std::string& s) {
    if (s == "program") return ToolKind::Program;
    if (s == "model") return ToolKind::Model;
    if (s == "agent") return ToolKind::Agent;
    r.fail(path, "unknown kind '" + s + "' (expected program|model|agent)");
}

ToolSpec parse_tool(const FieldReader& r, const nlohmann::json& j, const std::string& path,
                    const std::filesystem::path& base_dir) {
    if (!j.is_object()) r.fail(path, "expected object");
    ToolSpec spec;
    spec.name = r.string_field(j, path, "name");
    spec.kind = tool_kind_from(r, path + ".kind", r.string_field(j, path, "kind"));
    spec.endpoint = r.string_field(j, path, "endpoint");
    spec.description = j.value("description", std::string());

    if (j.contains("timeout_ms")) {
        const auto& t = j.at("timeout_ms");
        if (!t.is_number_integer()) r.fail(path + ".timeout_ms", "expected integer");
        spec.timeout_ms = t.get<std::int64_t>();
    }
    if (j.contains("retries")) {
        const auto& t = j.at("retries");
        if (!t.is_number_integer() || t.get<int>() < 0) r.fail(path + ".retries", "expected nonnegative integer");
        spec.retries = t.get<int>();
    }
    if (j.contains("options")) {
        if (!j.at("options").is_object()) r.fail(path + ".options", "expected object");
        spec.options = j.at("options");
    }
    if (spec.options.contains("corpus") && spec.options.at("corpus").is_string()) {
        std::filesystem::path corpus = spec.options.at("corpus").get<std::string>();
        if (corpus.is_relative() && !base_dir.empty()) corpus = base_dir / corpus;
        spec.options["corpus"] = corpus.lexically_normal().string();
    }

    if (j.contains("params")) {
        const auto& params = j.at("params");
        if (!params.is_array()) r.fail(path + ".params", "expected array");
        for (std::size_t i = 0; i < params.size(); ++i) {
            const std::string ppath = path + ".params[" + std::to_string(i) + "]";
            const auto& pj = params[i];
            if (!pj.is_object()) r.fail(ppath, "expected object");
            ParamSpec p;
            p.name = r.string_field(pj, ppath, "name");
            p.value_type = value_type_from(r, ppath + ".type", r.string_field(pj, ppath, "type"));
            if (pj.contains("required")) {
                if (!pj.at("required").is_boolean()) r.fail(ppath + ".required", "expected boolean");
                p.required = pj.at("required").get<bool>();
            }
            if (pj.contains("default")) p.default_value = pj.at("default");
            spec.params.push_back(std::move(p));
        }
    }
    return spec;
}

void validate_spec_fields(const ToolSpec& spec) {
    const std::string where = "tool '" + spec.name + "': ";
    if (spec.name.empty()) throw InvalidSpec("tool name is empty");
    if (spec.endpoint.empty()) throw InvalidSpec(where + "endpoint is empty");
    if (spec.timeout_ms <= 0) throw InvalidSpec(where + "timeout_ms must be positive");
    if (spec.retries < 0) throw InvalidSpec(where + "retries must be nonnegative");

    std::vector<std::string> seen;
    for (const auto& p : spec.params) {
        if (p.name.empty()) throw InvalidSpec(where + "parameter with empty name");
        if (std::find(seen.begin(), seen.end(), p.name) != seen.end()) {
            throw InvalidSpec(where + "parameter '" + p.name + "' declared twice");
        }
        seen.push_back(p.name);
        if (p.required && p.default_value) {
            throw InvalidSpec(where + "required parameter '" + p.name + "' carries a default");
        }
        if (p.default_value && !matches_type(*p.default_value, p.value_type)) {
            throw InvalidSpec(where + "default of '" + p.name + "' is not a " + std::string(to_string(p.value_type)));
        }
    }

    switch (spec.kind) {
        case ToolKind::Program:
            if (spec.is_builtin()) {
                const auto& names = builtin_tool_names();
                if (std::find(names.begin(), names.end(), spec.builtin_name()) == names.end()) {
                    throw InvalidSpec(where + "unknown builtin '" + spec.builtin_name() + "'");
                }
                if (spec.builtin_name() == "corpus_search" &&
                    !(spec.options.contains("corpus") && spec.options.at("corpus").is_string())) {
                    throw InvalidSpec(where + "corpus_search needs options.corpus");
                }
            } else if (!spec.is_http()) {
                throw InvalidSpec(where + "program endpoint must be http:// or builtin:");
            }
            break;
        case ToolKind::Model:
            if (!spec.is_http()) throw InvalidSpec(where + "model endpoint must be http://");
            break;
        case ToolKind::Agent:
            if (!starts_with(spec.endpoint, kAgentPrefix) || spec.agent_members().empty()) {
                throw InvalidSpec(where + "agent endpoint must be agent:<tool>[,<tool>...]");
            }
            break;
    }
}

}  // namespace

bool ToolSpec::is_builtin() const { return starts_with(endpoint, kBuiltinPrefix); }

bool ToolSpec::is_http() const { return starts_with(endpoint, "http://"); }

std::string ToolSpec::builtin_name() const {
    return is_builtin() ? endpoint.substr(kBuiltinPrefix.size()) : std::string();
}

std::vector<std::string> ToolSpec::agent_members() const {
    std::vector<std::string> out;
    if (!starts_with(endpoint, kAgentPrefix)) return out;
    std::stringstream ss(endpoint.substr(kAgentPrefix.size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

nlohmann::json ToolSpec::function_schema() const {
    nlohmann::json props = nlohmann::json::object();
    nlohmann::json required = nlohmann::json::array();
    for (const auto& p : params) {
        nlohmann::json prop = {{"type", to_string(p.value_type)}};
        if (p.default_value) prop["default"] = *p.default_value;
        props[p.name] = std::move(prop);
        if (p.required) required.push_back(p.name);
    }
    return {{"type", "function"},
            {"function",
             {{"name", name},
              {"description", description},
              {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}}}}};
}

const std::vector<std::string>& builtin_tool_names() {
    static const std::vector<std::string> names = {"calculator", "corpus_search", "echo"};
    return names;
}

int Registry::agent_depth(const ToolSpec& spec) const {
    if (spec.kind != ToolKind::Agent) return 0;
    int deepest = 0;
    for (const auto& member : spec.agent_members()) {
        const ToolSpec* m = find(member);
        if (m) deepest = std::max(deepest, agent_depth(*m));
    }
    return deepest + 1;
}

void Registry::add(ToolSpec spec) {
    validate_spec_fields(spec);
    if (index_.count(spec.name)) throw DuplicateTool("duplicate tool name '" + spec.name + "'");
    if (spec.kind == ToolKind::Agent) {
        for (const auto& member : spec.agent_members()) {
            if (member == spec.name || !find(member)) {
                throw InvalidSpec("agent '" + spec.name + "': member '" + member + "' is not a previously registered tool");
            }
        }
        if (agent_depth(spec) > kMaxAgentDepth) {
            throw InvalidSpec("agent '" + spec.name + "': nesting deeper than " + std::to_string(kMaxAgentDepth));
        }
    }
    index_.emplace(spec.name, tools_.size());
    tools_.push_back(std::move(spec));
}

const ToolSpec* Registry::find(std::string_view name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &tools_[it->second];
}

const ToolSpec& Registry::at(std::string_view name) const {
    if (const ToolSpec* spec = find(name)) return *spec;
    throw Error("unknown tool '" + std::string(name) + "'");
}

Registry Registry::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir, std::string_view source) {
    FieldReader r{source};
    if (!doc.is_object()) r.fail("$", "expected object");
    const auto& version = r.require(doc, "$", "schema_version");
    if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
        r.fail("$.schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");
    }
    const auto& tools = r.require(doc, "$", "tools");
    if (!tools.is_array()) r.fail("$.tools", "expected array");

    Registry reg;
    for (std::size_t i = 0; i < tools.size(); ++i) {
        reg.add(parse_tool(r, tools[i], "$.tools[" + std::to_string(i) + "]", base_dir));
    }
    return reg;
}

nlohmann::json Registry::to_json() const {
    nlohmann::json tools = nlohmann::json::array();
    for (const auto& spec : tools_) {
        nlohmann::json params = nlohmann::json::array();
        for (const auto& p : spec.params) {
            nlohmann::json pj = {{"name", p.name}, {"type", to_string(p.value_type)}, {"required", p.required}};
            if (p.default_value) pj["default"] = *p.default_value;
            params.push_back(std::move(pj));
        }
        tools.push_back({{"name", spec.name},
                         {"kind", to_string(spec.kind)},
                         {"endpoint", spec.endpoint},
                         {"timeout_ms", spec.timeout_ms},
                         {"retries", spec.retries},
                         {"description", spec.description},
                         {"options", spec.options},
                         {"params", std::move(params)}});
    }
    return {{"schema_version", kSchemaVersion}, {"tools", std::move(tools)}};
}

Registry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError(path.string() + ": cannot open file");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigParseError(path.string() + ": " + e.what());
    }
    return Registry::from_json(doc, path.parent_path(), path.string());
}

Arguments validate_arguments(const ToolSpec& spec, const Arguments& args) {
    if (!args.is_object()) throw TypeMismatch("arguments for '" + spec.name + "' must be an object");
    for (const auto& [key, value] : args.items()) {
        auto it = std::find_if(spec.params.begin(), spec.params.end(), [&](const ParamSpec& p) { return p.name == key; });
        if (it == spec.params.end()) throw UnknownParam("unknown parameter '" + key + "' for tool '" + spec.name + "'");
    }
    Arguments out = nlohmann::json::object();
    for (const auto& p : spec.params) {
        auto it = args.find(p.name);
        if (it == args.end()) {
            if (p.required) throw MissingParam("missing required parameter '" + p.name + "' for tool '" + spec.name + "'");
            if (p.default_value) out[p.name] = *p.default_value;
            continue;
        }
        if (!matches_type(*it, p.value_type)) {
            throw TypeMismatch("parameter '" + p.name + "' of tool '" + spec.name + "' expects " +
                               std::string(to_string(p.value_type)) + ", got " + json_type_name(*it));
        }
        out[p.name] = *it;
    }
    return out;
}

}  // namespace toolforge
