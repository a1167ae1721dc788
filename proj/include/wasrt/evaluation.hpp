#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wasrt/datamodel.hpp"

namespace wasrt {

enum class DangerZoneSource { annotation, none };

struct EvalConfig {
    double coverage_threshold = 0.5;  // tau
    double edge_tolerance = 20.0;     // theta, pixels
    long min_fp_area = 25;            // pixels
    DangerZoneSource danger_zone_source = DangerZoneSource::annotation;
    bool pool_edge_points = false;    // pool edge points over the dataset instead of averaging per frame

    void validate() const;
    friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct DetectionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    DetectionCounts& operator+=(const DetectionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    friend bool operator==(const DetectionCounts&, const DetectionCounts&) = default;
};

/// 4-connected component of predicted obstacle pixels (linear indices y*W+x).
struct Blob {
    std::vector<int> pixels;
    long area() const { return static_cast<long>(pixels.size()); }
};

struct MatchResult {
    long tp = 0;
    long fn = 0;
    std::vector<bool> detected;  // per ground-truth box
    std::vector<Blob> fp_blobs;
    DetectionCounts counts() const { return {tp, static_cast<long>(fp_blobs.size()), fn}; }
};

struct EdgeScore {
    long robust = 0;
    long total = 0;
    double fraction() const { return total ? static_cast<double>(robust) / static_cast<double>(total) : 0.0; }
};

/// Predicted water edge in column x: the topmost row r where pred(r,x) is water
/// and the pixel above is not (or r == 0). A ground-truth edge point is robust
/// when that row exists and lies within `tolerance` rows of it. Returns nullopt
/// for an empty polyline.
std::optional<EdgeScore> water_edge_score(const SegmentationMask& pred, const FrameAnnotation& gt, double tolerance);
std::optional<double> water_edge_robustness(const SegmentationMask& pred, const FrameAnnotation& gt,
                                            double tolerance);

/// Coverage-based box matching plus connected-component false positives in the
/// ground-truth water region outside every box.
MatchResult match_obstacles(const SegmentationMask& pred, const FrameAnnotation& gt, const EvalConfig& cfg);

/// Restricts a match to the danger zone: boxes whose centre lies inside the
/// zone, and false-positive blobs touching it.
DetectionCounts apply_danger_zone(const MatchResult& match, const SegmentationMask& pred, const FrameAnnotation& gt,
                                  const EvalConfig& cfg);

struct FrameResult {
    DetectionCounts overall;
    DetectionCounts danger;
    std::optional<EdgeScore> edge;
};

FrameResult evaluate_frame(const SegmentationMask& pred, const FrameAnnotation& gt, const EvalConfig& cfg);

struct RateSummary {
    double precision = 0;  // percent
    double recall = 0;     // percent
    double f1 = 0;         // percent
    bool precision_undefined = false;
    bool recall_undefined = false;
};

/// Pr, Re, F1 in percent. Undefined ratios are reported as 0 and flagged.
RateSummary rates(const DetectionCounts& c);
/// Harmonic mean of two percentages; 0 when both are 0.
double f1_score(double precision, double recall);
/// Round half away from zero to one decimal place.
double round1(double v);

struct DetectionReport {
    DetectionCounts overall;
    DetectionCounts danger;
    RateSummary overall_rates;
    RateSummary danger_rates;
    double mu_r = 0;  // fraction in [0,1]
    int frames = 0;
    int frames_with_edge = 0;
    EvalConfig config;
};

/// Throws DataError for an empty frame list.
DetectionReport summarize(std::span<const FrameResult> frames, const EvalConfig& cfg);

}  // namespace wasrt
