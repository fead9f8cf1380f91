#include "doctest.h"
#include "test_support.hpp"

#include "toolforge/errors.hpp"

using namespace toolforge;
using namespace toolforge::testing;
using nlohmann::json;

namespace {

json search_tool(const std::string& name = "search") {
    return {{"name", name},
            {"kind", "program"},
            {"endpoint", "http://127.0.0.1:8000/search"},
            {"params", json::array({{{"name", "query"}, {"type", "string"}, {"required", true}}})}};
}

json doc_with(json tools) { return {{"schema_version", 1}, {"tools", std::move(tools)}}; }

}  // namespace

TEST_CASE("minimal config loads") {
    const auto reg = Registry::from_json(doc_with(json::array({search_tool()})));
    CHECK(reg.size() == 1);
    const auto& s = reg.at("search");
    CHECK(s.kind == ToolKind::Program);
    CHECK(s.is_http());
    CHECK(s.params.at(0).required);
    CHECK(reg.find("missing") == nullptr);
    CHECK_THROWS_AS(reg.at("missing"), Error);
}

TEST_CASE("duplicate names are rejected") {
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({search_tool(), search_tool()}))), DuplicateTool);
}

TEST_CASE("invalid specs are rejected") {
    auto required_default = search_tool();
    required_default["params"][0]["default"] = "x";
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({required_default}))), InvalidSpec);

    auto bad_endpoint = search_tool();
    bad_endpoint["endpoint"] = "ftp://host/x";
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({bad_endpoint}))), InvalidSpec);

    auto unknown_builtin = search_tool();
    unknown_builtin["endpoint"] = "builtin:teleport";
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({unknown_builtin}))), InvalidSpec);

    auto model_builtin = search_tool();
    model_builtin["kind"] = "model";
    model_builtin["endpoint"] = "builtin:calculator";
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({model_builtin}))), InvalidSpec);

    auto dup_param = search_tool();
    dup_param["params"].push_back(dup_param["params"][0]);
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({dup_param}))), InvalidSpec);

    auto bad_default_type = search_tool();
    bad_default_type["params"].push_back({{"name", "limit"}, {"type", "number"}, {"default", "five"}});
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({bad_default_type}))), InvalidSpec);

    auto zero_timeout = search_tool();
    zero_timeout["timeout_ms"] = 0;
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({zero_timeout}))), InvalidSpec);
}

TEST_CASE("agent tools reference registered members") {
    json agent = {{"name", "pipeline"}, {"kind", "agent"}, {"endpoint", "agent:search,search"},
                  {"params", json::array({{{"name", "query"}, {"type", "string"}, {"required", true}}})}};
    const auto reg = Registry::from_json(doc_with(json::array({search_tool(), agent})));
    CHECK(reg.at("pipeline").agent_members() == std::vector<std::string>{"search", "search"});

    json orphan = agent;
    orphan["endpoint"] = "agent:nowhere";
    CHECK_THROWS_AS(Registry::from_json(doc_with(json::array({search_tool(), orphan}))), InvalidSpec);
}

TEST_CASE("config errors name the field") {
    auto bad = search_tool();
    bad["params"][0]["type"] = "blob";
    try {
        Registry::from_json(doc_with(json::array({bad})), {}, "tools.json");
        FAIL("expected an error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("tools.json") != std::string::npos);
        CHECK(msg.find("$.tools[0]") != std::string::npos);
    }
    CHECK_THROWS_AS(Registry::from_json({{"schema_version", 2}, {"tools", json::array()}}), ConfigParseError);
    CHECK_THROWS_AS(load_registry(data_dir() / "no_such_file.json"), ConfigParseError);
}

TEST_CASE("fixture tool config loads and resolves the corpus path") {
    const auto reg = load_registry(data_dir() / "tools.json");
    CHECK(reg.size() == 2);
    const auto corpus = reg.at("search").options.at("corpus").get<std::string>();
    CHECK(std::filesystem::path(corpus).is_absolute());
    CHECK(std::filesystem::exists(corpus));
}

TEST_CASE("registry round trip") {
    const auto reg = load_registry(data_dir() / "tools.json");
    CHECK(Registry::from_json(reg.to_json()) == reg);
    const auto mixed = mixed_registry();
    CHECK(Registry::from_json(mixed.to_json()) == mixed);
}

TEST_CASE("validate_arguments examples") {
    const auto reg = Registry::from_json(doc_with(json::array({search_tool()})));
    const auto& search = reg.at("search");
    CHECK(validate_arguments(search, {{"query", "paris"}}) == json{{"query", "paris"}});
    CHECK_THROWS_AS(validate_arguments(search, json::object()), MissingParam);
    CHECK_THROWS_AS(validate_arguments(search, {{"query", 3}}), TypeMismatch);
    CHECK_THROWS_AS(validate_arguments(search, {{"query", "x"}, {"lang", "en"}}), UnknownParam);
    CHECK_THROWS_AS(validate_arguments(search, json::array()), TypeMismatch);

    ToolSpec limited = search;
    limited.params.push_back({"limit", ValueType::Number, false, json(5)});
    CHECK(validate_arguments(limited, {{"query", "x"}}) == json{{"query", "x"}, {"limit", 5}});
    CHECK(validate_arguments(limited, {{"query", "x"}, {"limit", 2}}) == json{{"query", "x"}, {"limit", 2}});
}

TEST_CASE("validate_arguments is idempotent") {
    std::mt19937_64 rng(5);
    const auto reg = mixed_registry();
    for (int i = 0; i < 500; ++i) {
        const auto call = random_call(rng, reg);
        const auto& spec = reg.at(call.tool_name);
        const auto once = validate_arguments(spec, call.arguments);
        REQUIRE(validate_arguments(spec, once) == once);
        for (const auto& p : spec.params) {
            if (p.required || p.default_value) REQUIRE(once.contains(p.name));
        }
    }
}

TEST_CASE("function schema lists parameters") {
    const auto schema = mixed_registry().at("flags").function_schema();
    const auto& fn = schema.at("function");
    CHECK(fn.at("name") == "flags");
    CHECK(fn.at("parameters").at("properties").at("on").at("type") == "boolean");
    CHECK(fn.at("parameters").at("required") == json::array({"on"}));
}
