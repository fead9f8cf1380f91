#include "toolforge/reward.hpp"

#include "toolforge/errors.hpp"
#include "toolforge/http_client.hpp"
#include "toolforge/invoker.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <future>
#include <numeric>
#include <semaphore>
#include <set>

namespace toolforge {

std::string_view to_string(RuleDimension dim) {
    switch (dim) {
        case RuleDimension::FormatValidity: return "format";
        case RuleDimension::TaskCompletion: return "completion";
        case RuleDimension::Efficiency: return "efficiency";
    }
    return "?";
}

namespace {

RuleDimension dimension_from(std::string_view s, const std::string& where) {
    if (s == "format") return RuleDimension::FormatValidity;
    if (s == "completion") return RuleDimension::TaskCompletion;
    if (s == "efficiency") return RuleDimension::Efficiency;
    throw ConfigParseError(where + ": unknown dimension '" + std::string(s) + "' (expected format|completion|efficiency)");
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    double v = 0;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

// ---- rule reward -------------------------------------------------------------

void RuleSet::validate() const {
    std::set<std::string> names;
    for (const auto& r : rules) {
        if (!std::isfinite(r.weight)) throw ConfigParseError("reward.rules: weight of '" + r.name + "' is not finite");
        if (!names.insert(r.name).second) throw ConfigParseError("reward.rules: rule name '" + r.name + "' repeated");
    }
}

RuleSet RuleSet::from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigParseError("reward.rules: expected array");
    RuleSet set;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "reward.rules[" + std::to_string(i) + "]";
        const auto& rj = j[i];
        if (!rj.is_object()) throw ConfigParseError(where + ": expected object");
        if (!rj.contains("dimension") || !rj.at("dimension").is_string()) throw ConfigParseError(where + ".dimension: expected string");
        if (!rj.contains("weight") || !rj.at("weight").is_number()) throw ConfigParseError(where + ".weight: expected number");
        Rule rule;
        rule.dimension = dimension_from(rj.at("dimension").get<std::string>(), where + ".dimension");
        rule.name = rj.value("name", std::string(to_string(rule.dimension)));
        rule.weight = rj.at("weight").get<double>();
        set.rules.push_back(std::move(rule));
    }
    set.validate();
    return set;
}

nlohmann::json RuleSet::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rules) out.push_back({{"name", r.name}, {"weight", r.weight}, {"dimension", to_string(r.dimension)}});
    return out;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::string extract_answer(std::string_view final_answer) {
    constexpr std::string_view open = "<answer>";
    constexpr std::string_view close = "</answer>";
    const auto o = final_answer.rfind(open);
    if (o != std::string_view::npos) {
        const auto c = final_answer.find(close, o + open.size());
        if (c != std::string_view::npos) return trim(final_answer.substr(o + open.size(), c - o - open.size()));
    }
    std::optional<std::string> labelled;
    std::size_t pos = 0;
    while (pos <= final_answer.size()) {
        auto nl = final_answer.find('\n', pos);
        if (nl == std::string_view::npos) nl = final_answer.size();
        const std::string line = trim(final_answer.substr(pos, nl - pos));
        if (lower(line.substr(0, 7)) == "answer:") labelled = trim(std::string_view(line).substr(7));
        pos = nl + 1;
    }
    if (labelled) return *labelled;
    return trim(final_answer);
}

bool answer_matches(std::string_view final_answer, std::string_view ground_truth) {
    const std::string expected = normalize_answer(ground_truth);
    return !expected.empty() && normalize_answer(extract_answer(final_answer)) == expected;
}

std::size_t invocation_rounds(const Trajectory& traj, const CallGrammar& grammar) {
    std::size_t rounds = 0;
    for (std::size_t i = 0; i < traj.spans.size(); ++i) {
        const Span& span = traj.spans[i];
        if (span.kind != SegmentKind::ModelText) continue;
        const bool observed = i + 1 < traj.spans.size() && traj.spans[i + 1].kind == SegmentKind::Observation;
        if (observed && std::holds_alternative<ParsedCalls>(grammar.parse(span.text))) ++rounds;
    }
    return rounds;
}

bool calls_well_formed(const Trajectory& traj, const CallGrammar& grammar) {
    for (const Span& span : traj.spans) {
        if (span.kind != SegmentKind::ModelText || !grammar.mentions_call(span.text)) continue;
        if (!std::holds_alternative<ParsedCalls>(grammar.parse(span.text))) return false;
    }
    return true;
}

RuleScores compute_rule_score(const Trajectory& traj, std::string_view ground_truth, const RuleSet& rules,
                              std::size_t max_turns, const CallGrammar& grammar) {
    RuleScores out;
    for (const auto& rule : rules.rules) {
        double r = 0.0;
        switch (rule.dimension) {
            case RuleDimension::FormatValidity:
                r = calls_well_formed(traj, grammar) ? 1.0 : 0.0;
                break;
            case RuleDimension::TaskCompletion:
                r = traj.final_answer && answer_matches(*traj.final_answer, ground_truth) ? 1.0 : 0.0;
                break;
            case RuleDimension::Efficiency:
                if (max_turns > 0) {
                    const double used = static_cast<double>(invocation_rounds(traj, grammar));
                    r = std::max(0.0, 1.0 - used / static_cast<double>(max_turns));
                }
                break;
        }
        out.per_rule.emplace_back(rule.name, r);
        out.total += rule.weight * r;
    }
    return out;
}

RuleScores compute_rule_score(const Trajectory& traj, std::string_view ground_truth, const RuleSet& rules,
                              std::size_t max_turns) {
    return compute_rule_score(traj, ground_truth, rules, max_turns, Qwen3Grammar());
}

// ---- judge reward ------------------------------------------------------------

std::string JudgeConfig::default_template() {
    return "You are grading one episode of an assistant that answers questions with the help of tools.\n"
           "Judge whether the final answer is correct with respect to the reference answer and whether it is "
           "supported by the tool results shown in the transcript.\n\n"
           "Reference answer: {ground_truth}\n\n"
           "Transcript:\n{trajectory}"
           "Final answer: {final_answer}\n";
}

std::string build_judge_prompt(const Trajectory& traj, std::string_view ground_truth, const JudgeConfig& cfg) {
    const std::string& tmpl = cfg.criterion_template;
    if (tmpl.find("{trajectory}") == std::string::npos) throw TemplateError("judge template lacks {trajectory}");
    if (tmpl.find("{ground_truth}") == std::string::npos) throw TemplateError("judge template lacks {ground_truth}");

    const std::string transcript = render_transcript(traj);
    std::string prompt_text;
    if (!traj.spans.empty() && traj.spans.front().kind == SegmentKind::Prompt) prompt_text = traj.spans.front().text;
    const std::string final_answer = traj.final_answer.value_or("(none)");

    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        const auto close = tmpl.find('}', open);
        const std::string name = close == std::string::npos ? std::string() : tmpl.substr(open + 1, close - open - 1);
        const bool identifier = !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
            return std::islower(c) || c == '_';
        });
        if (!identifier) {
            out.push_back('{');
            pos = open + 1;
            continue;
        }
        if (name == "trajectory") out += transcript;
        else if (name == "ground_truth") out += ground_truth;
        else if (name == "final_answer") out += final_answer;
        else if (name == "prompt") out += prompt_text;
        else throw TemplateError("judge template has unresolved placeholder {" + name + "}");
        pos = close + 1;
    }
    if (!out.empty() && out.back() != '\n') out.push_back('\n');
    out += "\n";
    out += kScoreInstruction;
    return out;
}

double extract_judge_score(std::string_view judge_output) {
    std::optional<double> score;
    std::size_t pos = 0;
    while (pos <= judge_output.size()) {
        auto nl = judge_output.find('\n', pos);
        if (nl == std::string_view::npos) nl = judge_output.size();
        const std::string line = trim(judge_output.substr(pos, nl - pos));
        if (line.rfind("SCORE:", 0) == 0) {
            if (auto v = parse_double(std::string_view(line).substr(6))) score = *v;
        }
        pos = nl + 1;
    }
    if (!score) throw ScoreNotFound("judge output has no SCORE line");
    return std::clamp(*score, 0.0, 1.0);
}

JudgeOutcome judge_episode(const Trajectory& traj, std::string_view ground_truth, const JudgeConfig& cfg) {
    JudgeOutcome out;
    const std::string prompt = build_judge_prompt(traj, ground_truth, cfg);
    const auto request = http::chat_request(cfg.model, nlohmann::json::array({{{"role", "user"}, {"content", prompt}}}), 0.0);
    const auto resp = http::post_json(cfg.endpoint, request, std::chrono::milliseconds(cfg.timeout_ms));
    if (resp.transport_error) {
        out.error = "judge transport error: " + *resp.transport_error;
        return out;
    }
    if (!resp.success()) {
        out.error = "judge http status " + std::to_string(resp.status);
        return out;
    }
    auto content = http::chat_content(resp.body);
    if (!content) {
        out.error = "judge response unparseable";
        return out;
    }
    out.raw_output = std::move(*content);
    try {
        out.score = extract_judge_score(out.raw_output);
    } catch (const ScoreNotFound& e) {
        out.error = e.what();
    }
    return out;
}

// ---- verify reward -----------------------------------------------------------

void VerifySpec::validate() const {
    if (comparator == Comparator::NumericTolerance && !(epsilon >= 0.0 && std::isfinite(epsilon))) {
        throw ConfigParseError("verify: NumericTolerance needs a finite epsilon >= 0");
    }
}

bool compare_result(const VerifySpec& spec, std::string_view actual) {
    switch (spec.comparator) {
        case Comparator::ExactMatch:
            return trim(actual) == trim(spec.expected);
        case Comparator::NumericTolerance: {
            const auto a = parse_double(actual);
            const auto e = parse_double(spec.expected);
            return a && e && std::fabs(*a - *e) <= spec.epsilon;
        }
    }
    return false;
}

std::vector<VerifyOutcome> verify_outputs(const Invoker& invoker, std::span<const Trajectory> episodes,
                                          std::span<const VerifySpec> specs) {
    if (episodes.size() != specs.size()) throw Error("verify_outputs: specs must align with episodes");
    std::vector<ToolCall> calls;
    calls.reserve(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        specs[i].validate();
        ToolCall call;
        call.tool_name = specs[i].tool;
        const ToolSpec* tool = invoker.registry().find(specs[i].tool);
        const std::string action = extract_answer(episodes[i].final_answer.value_or(""));
        if (tool && !tool->params.empty()) call.arguments = {{tool->params.front().name, action}};
        calls.push_back(std::move(call));
    }
    const auto results = invoker.invoke_round(calls);
    std::vector<VerifyOutcome> out;
    out.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        if (r.ok()) {
            out.push_back({r.payload, compare_result(specs[i], r.payload) ? 1.0 : 0.0});
        } else {
            out.push_back({"error (" + std::string(to_string(r.status)) + "): " + r.payload, 0.0});
        }
    }
    return out;
}

// ---- combination -------------------------------------------------------------

nlohmann::json RewardReport::to_json() const {
    nlohmann::json rules = nlohmann::json::object();
    for (const auto& [name, score] : rule_scores) rules[name] = score;
    nlohmann::json j = {{"rule_scores", rules}, {"total", total}};
    j["r_rule"] = r_rule ? nlohmann::json(*r_rule) : nlohmann::json();
    j["r_judge"] = r_judge ? nlohmann::json(*r_judge) : nlohmann::json();
    j["r_verify"] = r_verify ? nlohmann::json(*r_verify) : nlohmann::json();
    j["verified_results"] = verified_results ? nlohmann::json(*verified_results) : nlohmann::json();
    if (judge_error) j["judge_error"] = *judge_error;
    return j;
}

RewardReport RewardReport::from_json(const nlohmann::json& j) {
    RewardReport r;
    for (const auto& [name, score] : j.at("rule_scores").items()) r.rule_scores.emplace_back(name, score.get<double>());
    auto opt_double = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    r.r_rule = opt_double("r_rule");
    r.r_judge = opt_double("r_judge");
    r.r_verify = opt_double("r_verify");
    r.total = j.at("total").get<double>();
    if (j.contains("verified_results") && !j.at("verified_results").is_null()) r.verified_results = j.at("verified_results").get<std::string>();
    if (j.contains("judge_error")) r.judge_error = j.at("judge_error").get<std::string>();
    return r;
}

double combine_components(const RewardReport& report, const std::optional<ComponentWeights>& weights) {
    double sum = 0.0;
    std::size_t count = 0;
    auto add = [&](const std::optional<double>& value, double weight) {
        if (!value) return;
        sum += weights ? weight * *value : *value;
        ++count;
    };
    const ComponentWeights w = weights.value_or(ComponentWeights{});
    add(report.r_rule, w.rule);
    add(report.r_judge, w.judge);
    add(report.r_verify, w.verify);
    if (count == 0) return 0.0;
    return weights ? sum : sum / static_cast<double>(count);
}

RewardConfig RewardConfig::from_json(const nlohmann::json& j, std::size_t max_turns) {
    RewardConfig cfg;
    cfg.max_turns = max_turns;
    if (!j.is_object()) throw ConfigParseError("reward: expected object");
    if (j.contains("rules")) cfg.rules = RuleSet::from_json(j.at("rules"));
    if (j.contains("judge")) {
        const auto& jj = j.at("judge");
        if (!jj.is_object()) throw ConfigParseError("reward.judge: expected object");
        if (jj.value("enabled", true)) {
            JudgeConfig judge;
            if (!jj.contains("endpoint") || !jj.at("endpoint").is_string()) {
                throw ConfigParseError("reward.judge.endpoint: expected string");
            }
            judge.endpoint = jj.at("endpoint").get<std::string>();
            if (!http::parse_url(judge.endpoint)) throw ConfigParseError("reward.judge.endpoint: not an http:// url");
            judge.model = jj.value("model", judge.model);
            judge.timeout_ms = jj.value("timeout_ms", judge.timeout_ms);
            judge.max_parallel = jj.value("max_parallel", judge.max_parallel);
            if (judge.max_parallel == 0) throw ConfigParseError("reward.judge.max_parallel: must be positive");
            if (jj.contains("template")) judge.criterion_template = jj.at("template").get<std::string>();
            cfg.judge = std::move(judge);
        }
    }
    if (j.contains("verify")) {
        const auto& vj = j.at("verify");
        if (!vj.is_object()) throw ConfigParseError("reward.verify: expected object");
        if (vj.value("enabled", true)) {
            VerifySettings v;
            if (!vj.contains("tool") || !vj.at("tool").is_string()) throw ConfigParseError("reward.verify.tool: expected string");
            v.tool = vj.at("tool").get<std::string>();
            const std::string comparator = vj.value("comparator", std::string("exact"));
            if (comparator == "exact") v.comparator = Comparator::ExactMatch;
            else if (comparator == "numeric") v.comparator = Comparator::NumericTolerance;
            else throw ConfigParseError("reward.verify.comparator: expected exact|numeric");
            v.epsilon = vj.value("epsilon", 0.0);
            VerifySpec{v.tool, "", v.comparator, v.epsilon}.validate();
            cfg.verify = std::move(v);
        }
    }
    if (j.contains("weights")) {
        const auto& wj = j.at("weights");
        if (!wj.is_object()) throw ConfigParseError("reward.weights: expected object");
        ComponentWeights w;
        w.rule = wj.value("rule", 1.0);
        w.judge = wj.value("judge", 1.0);
        w.verify = wj.value("verify", 1.0);
        if (!std::isfinite(w.rule) || !std::isfinite(w.judge) || !std::isfinite(w.verify)) {
            throw ConfigParseError("reward.weights: weights must be finite");
        }
        cfg.weights = w;
    }
    return cfg;
}

nlohmann::json RewardConfig::to_json() const {
    nlohmann::json j = {{"rules", rules.to_json()}};
    if (judge) {
        j["judge"] = {{"enabled", true},
                      {"endpoint", judge->endpoint},
                      {"model", judge->model},
                      {"timeout_ms", judge->timeout_ms},
                      {"max_parallel", judge->max_parallel},
                      {"template", judge->criterion_template}};
    }
    if (verify) {
        j["verify"] = {{"enabled", true},
                       {"tool", verify->tool},
                       {"comparator", verify->comparator == Comparator::ExactMatch ? "exact" : "numeric"},
                       {"epsilon", verify->epsilon}};
    }
    if (weights) j["weights"] = {{"rule", weights->rule}, {"judge", weights->judge}, {"verify", weights->verify}};
    return j;
}

RewardScorer::RewardScorer(RewardConfig config, std::shared_ptr<const Invoker> invoker)
    : config_(std::move(config)), invoker_(std::move(invoker)), grammar_(make_grammar(config_.grammar)) {
    config_.rules.validate();
    if (config_.verify && !invoker_) throw ConfigParseError("reward.verify needs a tool invoker");
    if (config_.verify && !invoker_->registry().find(config_.verify->tool)) {
        throw ConfigParseError("reward.verify.tool: '" + config_.verify->tool + "' is not a registered tool");
    }
}

std::vector<RewardReport> RewardScorer::score(std::span<const Trajectory> episodes, std::string_view ground_truth) const {
    std::vector<RewardReport> reports(episodes.size());

    if (!config_.rules.rules.empty()) {
        for (std::size_t i = 0; i < episodes.size(); ++i) {
            auto scores = compute_rule_score(episodes[i], ground_truth, config_.rules, config_.max_turns, *grammar_);
            reports[i].rule_scores = std::move(scores.per_rule);
            reports[i].r_rule = scores.total;
        }
    }

    std::vector<std::future<JudgeOutcome>> judged;
    if (config_.judge) {
        // Bounded fan-out: at most max_parallel judge requests in flight.
        auto slots = std::make_shared<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(config_.judge->max_parallel));
        const std::string truth(ground_truth);
        for (const auto& episode : episodes) {
            judged.push_back(std::async(std::launch::async, [&, slots, truth] {
                slots->acquire();
                JudgeOutcome out = judge_episode(episode, truth, *config_.judge);
                slots->release();
                return out;
            }));
        }
    }

    if (config_.verify) {
        std::vector<VerifySpec> specs(episodes.size(),
                                      VerifySpec{config_.verify->tool, std::string(ground_truth),
                                                 config_.verify->comparator, config_.verify->epsilon});
        const auto outcomes = verify_outputs(*invoker_, episodes, specs);
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            reports[i].r_verify = outcomes[i].r_verify;
            reports[i].verified_results = outcomes[i].verified_results;
        }
    }

    for (std::size_t i = 0; i < judged.size(); ++i) {
        JudgeOutcome out = judged[i].get();
        if (out.score) reports[i].r_judge = *out.score;
        else reports[i].judge_error = out.error;
    }

    for (auto& report : reports) report.total = combine_components(report, config_.weights);
    return reports;
}

// ---- group-relative advantage ------------------------------------------------

std::vector<double> group_advantages(std::span<const double> rewards) {
    std::vector<double> out(rewards.size(), 0.0);
    if (rewards.empty()) return out;
    // Identical rewards have zero variance even when the computed mean rounds.
    if (std::adjacent_find(rewards.begin(), rewards.end(), std::not_equal_to<>()) == rewards.end()) return out;
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double stddev = std::sqrt(var / n);
    if (stddev == 0.0) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / (stddev + kAdvantageEpsilon);
    return out;
}

}  // namespace toolforge
