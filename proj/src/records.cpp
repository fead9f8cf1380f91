#include "toolforge/records.hpp"

#include "toolforge/errors.hpp"

#include <fstream>
#include <set>

namespace toolforge {

nlohmann::json trajectory_to_json(const Trajectory& traj) {
    nlohmann::json spans = nlohmann::json::array();
    for (const Span& s : traj.spans) {
        spans.push_back({{"kind", to_string(s.kind)}, {"text", s.text}, {"token_count", s.token_count}, {"turn", s.turn}});
    }
    nlohmann::json j = {{"task_id", traj.task_id}, {"spans", std::move(spans)}};
    j["terminal"] = traj.terminal ? nlohmann::json(to_string(*traj.terminal)) : nlohmann::json();
    j["final_answer"] = traj.final_answer ? nlohmann::json(*traj.final_answer) : nlohmann::json();
    return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    Trajectory traj;
    traj.task_id = j.at("task_id").get<std::string>();
    for (const auto& sj : j.at("spans")) {
        Span s;
        s.kind = segment_kind_from_string(sj.at("kind").get<std::string>());
        s.text = sj.at("text").get<std::string>();
        s.token_count = sj.at("token_count").get<std::size_t>();
        s.turn = sj.at("turn").get<std::size_t>();
        traj.spans.push_back(std::move(s));
    }
    if (j.contains("terminal") && !j.at("terminal").is_null()) {
        traj.terminal = terminal_reason_from_string(j.at("terminal").get<std::string>());
    }
    if (j.contains("final_answer") && !j.at("final_answer").is_null()) {
        traj.final_answer = j.at("final_answer").get<std::string>();
    }
    return traj;
}

std::string dump_line(const nlohmann::json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

nlohmann::json episode_record(const EpisodeGroup& group, std::size_t i, const CallGrammar& grammar) {
    const Trajectory& traj = group.episodes.at(i);
    nlohmann::json j = trajectory_to_json(traj);
    j["episode"] = group.episode_indices.at(i);
    j["num_turns"] = traj.model_turns();
    j["num_rounds"] = invocation_rounds(traj, grammar);
    j["reward"] = i < group.reports.size() ? group.reports[i].to_json() : nlohmann::json();
    j["advantage"] = i < group.advantages.size() ? nlohmann::json(group.advantages[i]) : nlohmann::json();
    return j;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError(path.string() + ": cannot open file");
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<TaskRecord> load_tasks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError(path.string() + ": cannot open task file");
    std::vector<TaskRecord> tasks;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigParseError(where + ": " + e.what());
        }
        if (!j.is_object()) throw ConfigParseError(where + ": expected object");
        auto field = [&](const char* key) {
            if (!j.contains(key) || !j.at(key).is_string()) throw ConfigParseError(where + ": " + key + ": expected string");
            return j.at(key).get<std::string>();
        };
        TaskRecord task{field("task_id"), field("prompt"), field("ground_truth")};
        if (task.prompt.empty()) throw ConfigParseError(where + ": prompt: empty");
        if (!seen.insert(task.task_id).second) throw ConfigParseError(where + ": task_id: '" + task.task_id + "' repeated");
        tasks.push_back(std::move(task));
    }
    if (tasks.empty()) throw ConfigParseError(path.string() + ": no tasks");
    return tasks;
}

}  // namespace toolforge
