#include "wasrt/evaluation.hpp"

#include <cmath>
#include <deque>

#include "wasrt/errors.hpp"

namespace wasrt {

void EvalConfig::validate() const {
    if (!(coverage_threshold > 0 && coverage_threshold <= 1))
        throw ConfigError("coverage threshold must lie in (0,1]");
    if (!(edge_tolerance > 0)) throw ConfigError("edge tolerance must be positive");
    if (min_fp_area <= 0) throw ConfigError("min_fp_area must be positive");
}

std::optional<EdgeScore> water_edge_score(const SegmentationMask& pred, const FrameAnnotation& gt, double tolerance) {
    if (gt.water_edge.empty()) return std::nullopt;
    EdgeScore s;
    for (const Point& p : gt.water_edge) {
        ++s.total;
        if (p.x < 0 || p.x >= pred.width) continue;
        for (int r = 0; r < pred.height; ++r) {
            if (pred.is(r, p.x, Label::water) && (r == 0 || !pred.is(r - 1, p.x, Label::water))) {
                if (std::abs(r - p.y) <= tolerance) ++s.robust;
                break;
            }
        }
    }
    return s;
}

std::optional<double> water_edge_robustness(const SegmentationMask& pred, const FrameAnnotation& gt,
                                            double tolerance) {
    auto s = water_edge_score(pred, gt, tolerance);
    if (!s) return std::nullopt;
    return s->fraction();
}

MatchResult match_obstacles(const SegmentationMask& pred, const FrameAnnotation& gt, const EvalConfig& cfg) {
    if (!pred.same_size(gt.mask))
        throw DataError("prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                        " does not match ground truth " + std::to_string(gt.mask.width) + "x" +
                        std::to_string(gt.mask.height));
    const int H = pred.height, W = pred.width;
    MatchResult m;
    for (const Box& b : gt.obstacle_boxes) {
        long covered = 0;
        for (int y = b.y0; y < b.y1; ++y)
            for (int x = b.x0; x < b.x1; ++x) covered += pred.is(y, x, Label::obstacle);
        const bool hit = static_cast<double>(covered) >= cfg.coverage_threshold * static_cast<double>(b.area());
        m.detected.push_back(hit);
        (hit ? m.tp : m.fn) += 1;
    }

    // candidate FP pixels: predicted obstacle, gt water, outside all boxes
    std::vector<std::uint8_t> candidate(static_cast<std::size_t>(H) * W, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!pred.is(y, x, Label::obstacle) || !gt.mask.is(y, x, Label::water)) continue;
            bool in_box = false;
            for (const Box& b : gt.obstacle_boxes) in_box = in_box || b.contains(x, y);
            candidate[static_cast<std::size_t>(y) * W + x] = !in_box;
        }

    std::vector<std::uint8_t> seen(candidate.size(), 0);
    std::deque<int> queue;
    for (int start = 0; start < H * W; ++start) {
        if (!candidate[static_cast<std::size_t>(start)] || seen[static_cast<std::size_t>(start)]) continue;
        Blob blob;
        queue.push_back(start);
        seen[static_cast<std::size_t>(start)] = 1;
        while (!queue.empty()) {
            const int p = queue.front();
            queue.pop_front();
            blob.pixels.push_back(p);
            const int y = p / W, x = p % W;
            const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& n : nbrs) {
                if (n[0] < 0 || n[0] >= H || n[1] < 0 || n[1] >= W) continue;
                const int q = n[0] * W + n[1];
                if (candidate[static_cast<std::size_t>(q)] && !seen[static_cast<std::size_t>(q)]) {
                    seen[static_cast<std::size_t>(q)] = 1;
                    queue.push_back(q);
                }
            }
        }
        if (blob.area() >= cfg.min_fp_area) m.fp_blobs.push_back(std::move(blob));
    }
    return m;
}

DetectionCounts apply_danger_zone(const MatchResult& match, const SegmentationMask& pred, const FrameAnnotation& gt,
                                  const EvalConfig& cfg) {
    DetectionCounts c;
    if (cfg.danger_zone_source == DangerZoneSource::none) return c;
    if (gt.danger_zone.cells.empty()) throw DataError("annotation has no danger-zone mask");
    if (!gt.danger_zone.same_size(pred)) throw DataError("danger-zone mask size differs from prediction");
    for (std::size_t i = 0; i < gt.obstacle_boxes.size(); ++i) {
        const Box& b = gt.obstacle_boxes[i];
        if (!gt.danger_zone(b.center_y(), b.center_x())) continue;
        (match.detected[i] ? c.tp : c.fn) += 1;
    }
    for (const Blob& blob : match.fp_blobs) {
        bool touches = false;
        for (int p : blob.pixels) touches = touches || gt.danger_zone.cells[static_cast<std::size_t>(p)];
        c.fp += touches;
    }
    return c;
}

FrameResult evaluate_frame(const SegmentationMask& pred, const FrameAnnotation& gt, const EvalConfig& cfg) {
    FrameResult r;
    const MatchResult m = match_obstacles(pred, gt, cfg);
    r.overall = m.counts();
    r.danger = apply_danger_zone(m, pred, gt, cfg);
    r.edge = water_edge_score(pred, gt, cfg.edge_tolerance);
    return r;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

RateSummary rates(const DetectionCounts& c) {
    RateSummary r;
    if (c.tp + c.fp > 0)
        r.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    else
        r.precision_undefined = true;
    if (c.tp + c.fn > 0)
        r.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    else
        r.recall_undefined = true;
    r.f1 = f1_score(r.precision, r.recall);
    return r;
}

DetectionReport summarize(std::span<const FrameResult> frames, const EvalConfig& cfg) {
    if (frames.empty()) throw DataError("cannot summarize zero evaluated frames");
    DetectionReport rep;
    rep.config = cfg;
    rep.frames = static_cast<int>(frames.size());
    double edge_sum = 0;
    EdgeScore pooled;
    for (const FrameResult& f : frames) {
        rep.overall += f.overall;
        rep.danger += f.danger;
        if (f.edge) {
            ++rep.frames_with_edge;
            edge_sum += f.edge->fraction();
            pooled.robust += f.edge->robust;
            pooled.total += f.edge->total;
        }
    }
    rep.overall_rates = rates(rep.overall);
    rep.danger_rates = rates(rep.danger);
    if (rep.frames_with_edge > 0)
        rep.mu_r = cfg.pool_edge_points ? pooled.fraction() : edge_sum / rep.frames_with_edge;
    return rep;
}

}  // namespace wasrt
