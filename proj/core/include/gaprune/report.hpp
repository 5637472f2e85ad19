#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gaprune {

struct task_score {
    std::string name;
    std::string group; // "retrieval", "classification", "sts"
    double score = 0.0;
};

struct eval_report {
    std::string label; // e.g. "dense", "oneshot dai 50%"
    std::vector<task_score> tasks;
    std::vector<std::pair<std::string, double>> group_avgs; // group order of first appearance
    double overall = 0.0;                                    // unweighted mean of group averages
    std::optional<double> delta_pct;                         // vs the named dense reference
    std::string dense_label;
};

// Group means, overall mean and delta percent against `dense` (pass nullptr
// for the dense row itself). The dense reference must cover the same task
// set. delta_pct = 100 * (overall - dense_overall) / dense_overall.
eval_report aggregate_report(std::string label, std::span<const task_score> tasks,
                             const eval_report * dense);

std::string report_to_json(const eval_report & rep);
eval_report report_from_json_file(const std::filesystem::path & path);
void save_report_json(const std::filesystem::path & path, const eval_report & rep);

// aligned-column table over several rows, one line per report
std::string render_report_table(std::span<const eval_report> reports);

} // namespace gaprune
