#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wasrt/evaluation.hpp"

namespace wasrt {

/// Machine-readable report record. The evaluation config is embedded so the
/// numbers are self-describing.
nlohmann::json report_to_json(const DetectionReport& r);
DetectionReport report_from_json(const nlohmann::json& j);

/// Row of a method comparison table: mu_R, Pr, Re, F1 with danger-zone values
/// in parentheses. Percentages.
struct ComparisonRow {
    std::string method;
    double mu_r = 0;
    double precision = 0, recall = 0, f1 = 0;
    double precision_danger = 0, recall_danger = 0, f1_danger = 0;
    bool inconsistent = false;  // stored F1 disagrees with the harmonic mean of Pr/Re
};

/// Row of an ablation table: mu_R, FP count, F1, danger-zone values in parentheses.
struct AblationRow {
    std::string label;
    double mu_r = 0;
    long fp = 0, fp_danger = 0;
    double f1 = 0, f1_danger = 0;
};

ComparisonRow comparison_row(const std::string& method, const DetectionReport& r);
AblationRow ablation_row(const std::string& label, const DetectionReport& r);

/// Published benchmark numbers of single- and multi-frame methods, for display next
/// to locally computed rows. Not recomputed here.
std::vector<ComparisonRow> published_comparison_rows();

/// True when `f1` is within `tolerance` of f1_score(precision, recall).
bool f1_consistent(double precision, double recall, double f1, double tolerance = 0.05);
/// Sets `inconsistent` on every row whose overall or danger-zone F1 fails the check.
void flag_inconsistent(std::vector<ComparisonRow>& rows, double tolerance = 0.05);

std::string format_comparison_table(std::span<const ComparisonRow> rows);
std::string format_ablation_table(std::span<const AblationRow> rows, const std::string& first_column = "config");

}  // namespace wasrt
