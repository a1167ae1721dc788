#include "wasrt/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "wasrt/config_io.hpp"
#include "wasrt/errors.hpp"

namespace wasrt {

using nlohmann::json;

namespace {

json counts_json(const DetectionCounts& c, const RateSummary& r) {
    return {{"tp", c.tp},
            {"fp", c.fp},
            {"fn", c.fn},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"precision_undefined", r.precision_undefined},
            {"recall_undefined", r.recall_undefined}};
}

void counts_from(const json& j, DetectionCounts& c, RateSummary& r) {
    c.tp = j.at("tp").get<long>();
    c.fp = j.at("fp").get<long>();
    c.fn = j.at("fn").get<long>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.precision_undefined = j.value("precision_undefined", false);
    r.recall_undefined = j.value("recall_undefined", false);
}

std::string fixed1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", round1(v));
    return buf;
}

std::string pair(const std::string& a, const std::string& b) { return a + " (" + b + ")"; }

std::string render(const std::vector<std::vector<std::string>>& cells) {
    std::vector<std::size_t> width(cells.front().size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::ostringstream os;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t i = 0; i < cells[r].size(); ++i) {
            const std::string& s = cells[r][i];
            if (i == 0)
                os << s << std::string(width[i] - s.size(), ' ');
            else
                os << " | " << std::string(width[i] - s.size(), ' ') << s;
        }
        os << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t w : width) total += w + 3;
            os << std::string(total - 3, '-') << '\n';
        }
    }
    return os.str();
}

}  // namespace

json report_to_json(const DetectionReport& r) {
    return {{"config", r.config},
            {"frames", r.frames},
            {"frames_with_edge", r.frames_with_edge},
            {"mu_r", r.mu_r},
            {"overall", counts_json(r.overall, r.overall_rates)},
            {"danger_zone", counts_json(r.danger, r.danger_rates)}};
}

DetectionReport report_from_json(const json& j) {
    DetectionReport r;
    try {
        r.config = j.at("config").get<EvalConfig>();
        r.frames = j.at("frames").get<int>();
        r.frames_with_edge = j.value("frames_with_edge", 0);
        r.mu_r = j.at("mu_r").get<double>();
        counts_from(j.at("overall"), r.overall, r.overall_rates);
        counts_from(j.at("danger_zone"), r.danger, r.danger_rates);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("report record: ") + e.what());
    }
    return r;
}

ComparisonRow comparison_row(const std::string& method, const DetectionReport& r) {
    return {method,
            100 * r.mu_r,
            r.overall_rates.precision,
            r.overall_rates.recall,
            r.overall_rates.f1,
            r.danger_rates.precision,
            r.danger_rates.recall,
            r.danger_rates.f1,
            false};
}

AblationRow ablation_row(const std::string& label, const DetectionReport& r) {
    return {label, 100 * r.mu_r, r.overall.fp, r.danger.fp, r.overall_rates.f1, r.danger_rates.f1};
}

std::vector<ComparisonRow> published_comparison_rows() {
    return {
        {"DeepLabV3+", 96.8, 80.1, 92.7, 86.0, 18.6, 98.4, 31.3, false},
        {"BiSeNet", 97.4, 90.5, 89.9, 90.2, 53.7, 97.0, 69.1, false},
        {"RefineNet", 97.3, 89.0, 93.0, 91.0, 45.1, 98.1, 61.8, false},
        {"WaSR", 97.8, 95.1, 91.9, 93.5, 80.3, 96.2, 87.6, false},
        {"TMANet", 98.3, 96.4, 85.1, 90.4, 90.0, 93.0, 91.5, false},
        {"STM", 98.4, 96.3, 92.5, 94.4, 86.2, 96.4, 91.0, false},
        {"WaSR-T", 98.4, 96.9, 92.0, 94.4, 90.8, 96.5, 93.6, false},
    };
}

bool f1_consistent(double precision, double recall, double f1, double tolerance) {
    return std::abs(f1_score(precision, recall) - f1) <= tolerance;
}

void flag_inconsistent(std::vector<ComparisonRow>& rows, double tolerance) {
    for (auto& r : rows)
        r.inconsistent = !f1_consistent(r.precision, r.recall, r.f1, tolerance) ||
                         !f1_consistent(r.precision_danger, r.recall_danger, r.f1_danger, tolerance);
}

std::string format_comparison_table(std::span<const ComparisonRow> rows) {
    std::vector<std::vector<std::string>> cells{{"method", "mu_R", "Pr", "Re", "F1"}};
    bool any_flag = false;
    for (const auto& r : rows) {
        cells.push_back({r.method + (r.inconsistent ? " *" : ""), fixed1(r.mu_r),
                         pair(fixed1(r.precision), fixed1(r.precision_danger)),
                         pair(fixed1(r.recall), fixed1(r.recall_danger)), pair(fixed1(r.f1), fixed1(r.f1_danger))});
        any_flag = any_flag || r.inconsistent;
    }
    std::string out = render(cells);
    if (any_flag) out += "* stored F1 disagrees with the harmonic mean of Pr and Re by more than 0.05\n";
    return out;
}

std::string format_ablation_table(std::span<const AblationRow> rows, const std::string& first_column) {
    std::vector<std::vector<std::string>> cells{{first_column, "mu_R", "FP", "F1"}};
    for (const auto& r : rows)
        cells.push_back({r.label, fixed1(r.mu_r), pair(std::to_string(r.fp), std::to_string(r.fp_danger)),
                         pair(fixed1(r.f1), fixed1(r.f1_danger))});
    return render(cells);
}

}  // namespace wasrt
