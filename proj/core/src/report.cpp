#include "gaprune/report.hpp"

#include "gaprune/errors.hpp"
#include "gaprune/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>

namespace gaprune {

using nlohmann::json;

eval_report aggregate_report(std::string label, std::span<const task_score> tasks,
                             const eval_report * dense) {
    if (tasks.empty()) {
        throw report_error("aggregate_report: no task scores");
    }
    if (dense) {
        auto names = [](std::span<const task_score> ts) {
            std::vector<std::string> v;
            for (const auto & t : ts) {
                v.push_back(t.group + "/" + t.name);
            }
            std::sort(v.begin(), v.end());
            return v;
        };
        if (names(tasks) != names(dense->tasks)) {
            throw report_error("aggregate_report: task set differs from dense reference '" +
                               dense->label + "'");
        }
    }

    eval_report rep;
    rep.label = std::move(label);
    rep.tasks.assign(tasks.begin(), tasks.end());

    for (const task_score & t : tasks) {
        auto it = std::find_if(rep.group_avgs.begin(), rep.group_avgs.end(),
                               [&](const auto & g) { return g.first == t.group; });
        if (it == rep.group_avgs.end()) {
            rep.group_avgs.emplace_back(t.group, 0.0);
        }
    }
    for (auto & [group, avg] : rep.group_avgs) {
        double sum = 0.0;
        int64_t n = 0;
        for (const task_score & t : tasks) {
            if (t.group == group) {
                sum += t.score;
                ++n;
            }
        }
        avg = sum / double(n);
    }

    double overall = 0.0;
    for (const auto & [group, avg] : rep.group_avgs) {
        overall += avg;
    }
    rep.overall = overall / double(rep.group_avgs.size());

    if (dense) {
        if (dense->overall == 0.0) {
            throw report_error("aggregate_report: dense reference average is zero");
        }
        rep.delta_pct = 100.0 * (rep.overall - dense->overall) / dense->overall;
        rep.dense_label = dense->label;
    }
    return rep;
}

std::string report_to_json(const eval_report & rep) {
    json j;
    j["label"] = rep.label;
    json tasks = json::array();
    for (const task_score & t : rep.tasks) {
        tasks.push_back({{"name", t.name}, {"group", t.group}, {"score", t.score}});
    }
    j["tasks"] = std::move(tasks);
    json groups = json::object();
    for (const auto & [group, avg] : rep.group_avgs) {
        groups[group] = avg;
    }
    j["group_averages"] = std::move(groups);
    j["overall"] = rep.overall;
    if (rep.delta_pct) {
        j["delta_pct"]   = *rep.delta_pct;
        j["dense_label"] = rep.dense_label;
    }
    return j.dump(2) + "\n";
}

eval_report report_from_json_file(const std::filesystem::path & path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception & e) {
        throw parse_error(path.string() + ": " + e.what());
    }
    eval_report rep;
    rep.label = j.at("label").get<std::string>();
    for (const json & jt : j.at("tasks")) {
        rep.tasks.push_back({jt.at("name").get<std::string>(),
                             jt.at("group").get<std::string>(),
                             jt.at("score").get<double>()});
    }
    for (const auto & [group, avg] : j.at("group_averages").items()) {
        rep.group_avgs.emplace_back(group, avg.get<double>());
    }
    rep.overall = j.at("overall").get<double>();
    if (j.contains("delta_pct")) {
        rep.delta_pct = j.at("delta_pct").get<double>();
        rep.dense_label = j.value("dense_label", "");
    }
    return rep;
}

void save_report_json(const std::filesystem::path & path, const eval_report & rep) {
    write_file(path, report_to_json(rep));
}

std::string render_report_table(std::span<const eval_report> reports) {
    if (reports.empty()) {
        return "";
    }
    // columns: label, one per group (order from the first report), avg, delta%
    std::vector<std::string> groups;
    for (const auto & [group, avg] : reports[0].group_avgs) {
        groups.push_back(group);
    }

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head = {"model"};
    for (const auto & g : groups) {
        head.push_back(g);
    }
    head.push_back("avg");
    head.push_back("delta%");
    rows.push_back(head);

    char buf[64];
    for (const eval_report & rep : reports) {
        std::vector<std::string> row = {rep.label};
        for (const std::string & g : groups) {
            auto it = std::find_if(rep.group_avgs.begin(), rep.group_avgs.end(),
                                   [&](const auto & p) { return p.first == g; });
            if (it == rep.group_avgs.end()) {
                row.push_back("--");
            } else {
                std::snprintf(buf, sizeof(buf), "%.4f", it->second);
                row.push_back(buf);
            }
        }
        std::snprintf(buf, sizeof(buf), "%.4f", rep.overall);
        row.push_back(buf);
        if (rep.delta_pct) {
            std::snprintf(buf, sizeof(buf), "%+.2f%%", *rep.delta_pct);
            row.push_back(buf);
        } else {
            row.push_back("--");
        }
        rows.push_back(std::move(row));
    }

    std::vector<size_t> width(rows[0].size(), 0);
    for (const auto & row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    std::string out;
    for (const auto & row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) {
                out.append(width[c] - row[c].size() + 2, ' ');
            }
        }
        out.push_back('\n');
    }
    return out;
}

} // namespace gaprune
