#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toolforge {

/// Structured argument map (a JSON object).
using Arguments = nlohmann::json;

enum class ToolKind { Program, Model, Agent };
enum class ValueType { String, Number, Boolean, Array };

std::string_view to_string(ToolKind kind);
std::string_view to_string(ValueType type);

struct ParamSpec {
    std::string name;
    ValueType value_type = ValueType::String;
    bool required = false;
    std::optional<nlohmann::json> default_value;

    bool operator==(const ParamSpec&) const = default;
};

struct ToolSpec {
    std::string name;
    ToolKind kind = ToolKind::Program;
    std::vector<ParamSpec> params;
    /// `http://host[:port]/path`, `builtin:<name>` or `agent:<tool>,<tool>,...`.
    std::string endpoint;
    std::int64_t timeout_ms = 10000;
    int retries = 0;
    std::string description;
    /// Endpoint-specific settings, e.g. `corpus` and `top_k` for corpus_search.
    nlohmann::json options = nlohmann::json::object();

    bool operator==(const ToolSpec&) const = default;

    bool is_builtin() const;
    bool is_http() const;
    /// Name after `builtin:`; empty for other endpoints.
    std::string builtin_name() const;
    /// Member tool names of an `agent:` endpoint.
    std::vector<std::string> agent_members() const;

    /// JSON-schema function description advertised to the model.
    nlohmann::json function_schema() const;
};

/// Names of the builtin program tools this build provides.
const std::vector<std::string>& builtin_tool_names();

/// Immutable after load; safe to share read-only across workers.
class Registry {
public:
    static constexpr int kSchemaVersion = 1;
    static constexpr int kMaxAgentDepth = 2;

    /// Validates and adds a tool. Throws DuplicateTool or InvalidSpec.
    /// Agent members must already be registered.
    void add(ToolSpec spec);

    const ToolSpec* find(std::string_view name) const;
    /// Throws Error when the name is unknown.
    const ToolSpec& at(std::string_view name) const;

    std::size_t size() const { return tools_.size(); }
    const std::vector<ToolSpec>& tools() const { return tools_; }

    /// Parses the config document. Relative corpus paths in builtin options
    /// are resolved against `base_dir`. `source` names the file in errors.
    static Registry from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {},
                              std::string_view source = "<tools>");
    nlohmann::json to_json() const;

    bool operator==(const Registry& other) const { return tools_ == other.tools_; }

private:
    int agent_depth(const ToolSpec& spec) const;

    std::vector<ToolSpec> tools_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Loads a tool config file. Throws ConfigParseError, DuplicateTool or InvalidSpec.
Registry load_registry(const std::filesystem::path& path);

/// Checks `args` against `spec`: required present, defaults filled, types
/// matching, no unknown names. Throws MissingParam, TypeMismatch or UnknownParam.
Arguments validate_arguments(const ToolSpec& spec, const Arguments& args);

}  // namespace toolforge
