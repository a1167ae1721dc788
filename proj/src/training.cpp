#include "wasrt/training.hpp"

#include <cmath>
#include <sstream>

#include <omp.h>

#include "wasrt/errors.hpp"

namespace wasrt {

double LearningRateSchedule::at(int epoch) const {
    if (step_epochs <= 0) return base;
    return base * std::pow(gamma, epoch / step_epochs);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
    if (separation_loss_weight < 0) throw ConfigError("separation_loss_weight must be >= 0");
    if (learning_rate.base < 0) throw ConfigError("learning rate must be >= 0");
    if (grad_context_depth < 0) throw ConfigError("grad_context_depth must be >= 0");
}

// ------------------------------------------------------------------ loss

LossTerms segmentation_loss(const Tensor& scores, const SegmentationMask& gt, const Tensor* decoder_input,
                            double separation_weight) {
    const int C = scores.dim(0), H = scores.dim(1), W = scores.dim(2);
    if (C != kNumClasses || gt.height != H || gt.width != W)
        throw DataError("loss: scores " + shape_string(scores.shape()) + " do not match mask " +
                        std::to_string(gt.height) + "x" + std::to_string(gt.width));
    gt.validate();
    LossTerms out;
    out.grad_scores = Tensor(scores.shape());
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const double inv_pixels = 1.0 / static_cast<double>(plane);
    double ce = 0;
    for (std::size_t p = 0; p < plane; ++p) {
        double mx = scores[p];
        for (int c = 1; c < C; ++c) mx = std::max(mx, scores[c * plane + p]);
        double z = 0;
        for (int c = 0; c < C; ++c) z += std::exp(scores[c * plane + p] - mx);
        const double log_z = mx + std::log(z);
        const int label = gt.cells[p];
        ce += log_z - scores[label * plane + p];
        for (int c = 0; c < C; ++c) {
            const double prob = std::exp(scores[c * plane + p] - log_z);
            out.grad_scores[c * plane + p] = (prob - (c == label ? 1.0 : 0.0)) * inv_pixels;
        }
    }
    out.cross_entropy = ce * inv_pixels;
    out.total = out.cross_entropy;

    if (decoder_input == nullptr || separation_weight == 0) return out;
    const Tensor& f = *decoder_input;
    const int N = f.dim(0), h = f.dim(1), w = f.dim(2);
    out.grad_decoder_input = Tensor(f.shape());
    const int sy = H / h, sx = W / w;
    std::vector<double> mean_water(static_cast<std::size_t>(N), 0), mean_obst(static_cast<std::size_t>(N), 0);
    std::vector<int> cell_label(static_cast<std::size_t>(h) * w);
    int n_water = 0, n_obst = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int label = gt(y * sy + sy / 2, x * sx + sx / 2);
            cell_label[static_cast<std::size_t>(y) * w + x] = label;
            std::vector<double>* acc = nullptr;
            if (label == static_cast<int>(Label::water)) {
                acc = &mean_water;
                ++n_water;
            } else if (label == static_cast<int>(Label::obstacle)) {
                acc = &mean_obst;
                ++n_obst;
            }
            if (acc)
                for (int c = 0; c < N; ++c) (*acc)[static_cast<std::size_t>(c)] += f.at(c, y, x);
        }
    if (n_water == 0 || n_obst == 0) return out;
    double dot = 0, nw2 = 0, no2 = 0;
    for (int c = 0; c < N; ++c) {
        auto i = static_cast<std::size_t>(c);
        mean_water[i] /= n_water;
        mean_obst[i] /= n_obst;
        dot += mean_water[i] * mean_obst[i];
        nw2 += mean_water[i] * mean_water[i];
        no2 += mean_obst[i] * mean_obst[i];
    }
    if (nw2 < 1e-24 || no2 < 1e-24) return out;
    const double nw = std::sqrt(nw2), no = std::sqrt(no2);
    const double cos = dot / (nw * no);
    out.separation = cos * cos;
    out.total += separation_weight * out.separation;

    // d cos^2 / d mean_water = 2 cos (mean_obst / (|w||o|) - cos * mean_water / |w|^2)
    std::vector<double> g_water(static_cast<std::size_t>(N)), g_obst(static_cast<std::size_t>(N));
    for (int c = 0; c < N; ++c) {
        auto i = static_cast<std::size_t>(c);
        g_water[i] = separation_weight * 2 * cos * (mean_obst[i] / (nw * no) - cos * mean_water[i] / nw2) / n_water;
        g_obst[i] = separation_weight * 2 * cos * (mean_water[i] / (nw * no) - cos * mean_obst[i] / no2) / n_obst;
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int label = cell_label[static_cast<std::size_t>(y) * w + x];
            const std::vector<double>* g = label == static_cast<int>(Label::water)      ? &g_water
                                           : label == static_cast<int>(Label::obstacle) ? &g_obst
                                                                                        : nullptr;
            if (g)
                for (int c = 0; c < N; ++c) out.grad_decoder_input.at(c, y, x) = (*g)[static_cast<std::size_t>(c)];
        }
    return out;
}

// --------------------------------------------------------------- sampling

BatchSampler::BatchSampler(std::vector<std::size_t> base, std::vector<std::size_t> extension, std::uint64_t seed)
    : base_(std::move(base)), extension_(std::move(extension)), rng_(seed) {
    if (base_.empty() || extension_.empty())
        throw ConfigError("equal-probability sampling needs non-empty base and extension subsets (got " +
                          std::to_string(base_.size()) + " and " + std::to_string(extension_.size()) + ")");
}

std::vector<std::size_t> BatchSampler::sample(int k) {
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(k));
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < k; ++i) {
        const auto& subset = coin(rng_) ? extension_ : base_;
        std::uniform_int_distribution<std::size_t> pick(0, subset.size() - 1);
        out.push_back(subset[pick(rng_)]);
    }
    return out;
}

// ------------------------------------------------- gradient restriction

ForwardTrace restricted_forward(const Network& net, const TemporalSample& sample, int grad_context_depth) {
    return net.forward_trace(sample, grad_context_depth);
}

// ------------------------------------------------------------ augmentation

AugmentDraw draw_augmentation(std::mt19937_64& rng, const AugmentConfig& cfg) {
    AugmentDraw d;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Draw every variate regardless of toggles so the stream layout is fixed.
    const double flip_u = unit(rng), b_u = unit(rng), c_u = unit(rng);
    d.flip = cfg.horizontal_flip && flip_u < cfg.flip_probability;
    if (cfg.photometric) {
        d.brightness = (2 * b_u - 1) * cfg.brightness;
        d.contrast = 1 + (2 * c_u - 1) * cfg.contrast;
    }
    return d;
}

namespace {

void flip_image(Tensor& img) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W / 2; ++x) std::swap(img.at(c, y, x), img.at(c, y, W - 1 - x));
}

void flip_grid(Grid& g) {
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width / 2; ++x) std::swap(g(y, x), g(y, g.width - 1 - x));
}

void photometric(Tensor& img, double brightness, double contrast) {
    for (Real& v : img.values()) v = std::clamp((v - 0.5) * contrast + 0.5 + brightness, 0.0, 1.0);
}

void transform_frame(Frame& f, const AugmentDraw& d) {
    if (d.flip) flip_image(f.image);
    if (d.brightness != 0.0 || d.contrast != 1.0) photometric(f.image, d.brightness, d.contrast);
}

}  // namespace

TemporalSample apply_augmentation(const TemporalSample& sample, const AugmentDraw& draw) {
    TemporalSample out = sample;
    transform_frame(out.target, draw);
    for (Frame& f : out.context) transform_frame(f, draw);
    if (out.annotation && draw.flip) {
        FrameAnnotation& a = *out.annotation;
        const int W = a.mask.width;
        flip_grid(a.mask);
        if (!a.danger_zone.cells.empty()) flip_grid(a.danger_zone);
        for (Box& b : a.obstacle_boxes) b = {W - b.x1, b.y0, W - b.x0, b.y1};
        for (Point& p : a.water_edge) p.x = W - 1 - p.x;
        std::reverse(a.water_edge.begin(), a.water_edge.end());
    }
    return out;
}

TemporalSample augment(const TemporalSample& sample, std::mt19937_64& rng, const AugmentConfig& cfg) {
    return apply_augmentation(sample, draw_augmentation(rng, cfg));
}

TemporalSample with_context_length(const TemporalSample& sample, int context_length) {
    TemporalSample out;
    out.target = sample.target;
    out.annotation = sample.annotation;
    const int have = sample.context_length();
    for (int i = 0; i < context_length; ++i) {
        const int src = have - context_length + i;
        if (src >= 0)
            out.context.push_back(sample.context[static_cast<std::size_t>(src)]);
        else
            out.context.push_back(have > 0 ? sample.context.front() : sample.target);
    }
    return out;
}

// ---------------------------------------------------------------- optimizer

AdamOptimizer::AdamOptimizer(const Parameters& params, double beta1, double beta2, double eps)
    : m_(zero_gradients(params)), v_(zero_gradients(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(Parameters& params, const Gradients& grads, double learning_rate) {
    ++t_;
    const double c1 = 1 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        const Tensor& g = grads.at(name);
        Tensor& m = m_.at(name);
        Tensor& v = v_.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
            p[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

// ------------------------------------------------------------------- loop

TrainResult train(const std::vector<TemporalSample>& samples, const std::vector<Subset>& subsets,
                  const NetworkConfig& net_cfg, const TrainConfig& cfg, const LossCallback& on_step) {
    net_cfg.validate();
    cfg.validate();
    if (samples.empty()) throw ConfigError("training corpus is empty");
    if (subsets.size() != samples.size()) throw ConfigError("subset tags do not match sample count");
    for (const auto& s : samples)
        if (!s.annotation) throw DataError("training sample " + s.target.sequence_id + " has no annotation");

    std::vector<std::size_t> base, ext;
    for (std::size_t i = 0; i < samples.size(); ++i) (subsets[i] == Subset::base ? base : ext).push_back(i);
    const bool balanced = cfg.equal_subset_sampling && !base.empty() && !ext.empty();
    std::optional<BatchSampler> sampler;
    if (balanced) sampler.emplace(base, ext, cfg.seed);
    std::mt19937_64 uniform_rng(cfg.seed);

    TrainResult result{Network(net_cfg, cfg.seed), {}};
    Network& net = result.network;
    AdamOptimizer opt(net.params());
    const int steps_per_epoch = cfg.steps_per_epoch > 0
                                    ? cfg.steps_per_epoch
                                    : static_cast<int>((samples.size() + cfg.batch_size - 1) / cfg.batch_size);
    const int T = net_cfg.context_length;

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate.at(epoch);
        for (int s = 0; s < steps_per_epoch; ++s, ++step) {
            std::vector<std::size_t> batch;
            if (sampler) {
                batch = sampler->sample(cfg.batch_size);
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
                for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(pick(uniform_rng));
            }
            const int B = static_cast<int>(batch.size());
            std::vector<Gradients> grads(static_cast<std::size_t>(B));
            std::vector<LossTerms> losses(static_cast<std::size_t>(B));

            // Per-item work is independent; gradients are reduced in batch order
            // below so the result does not depend on the thread count.
#pragma omp parallel for schedule(dynamic, 1)
            for (int b = 0; b < B; ++b) {
                std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                                  static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(b)};
                std::mt19937_64 rng(seq);
                const TemporalSample item = augment(with_context_length(samples[batch[static_cast<std::size_t>(b)]], T),
                                                    rng, cfg.augmentation);
                const ForwardTrace tr = restricted_forward(net, item, std::min(cfg.grad_context_depth, T));
                LossTerms loss = segmentation_loss(tr.scores, item.annotation->mask, &tr.decoder_input,
                                                   cfg.separation_loss_weight);
                const Tensor* extra = loss.grad_decoder_input.empty() ? nullptr : &loss.grad_decoder_input;
                grads[static_cast<std::size_t>(b)] = net.backward(tr, loss.grad_scores, extra).grads;
                loss.grad_scores = {};
                loss.grad_decoder_input = {};
                losses[static_cast<std::size_t>(b)] = std::move(loss);
            }

            Gradients total = zero_gradients(net.params());
            LossRecord rec{step, epoch, 0, 0, 0, lr};
            for (int b = 0; b < B; ++b) {
                accumulate(total, grads[static_cast<std::size_t>(b)]);
                rec.total += losses[static_cast<std::size_t>(b)].total / B;
                rec.cross_entropy += losses[static_cast<std::size_t>(b)].cross_entropy / B;
                rec.separation += losses[static_cast<std::size_t>(b)].separation / B;
            }
            if (!std::isfinite(rec.total))
                throw TrainingError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                                    std::to_string(epoch) + ")");
            for (auto& [name, g] : total) g *= 1.0 / B;
            if (lr > 0) opt.step(net.params(), total, lr);
            result.curve.push_back(rec);
            if (on_step) on_step(rec);
        }
    }
    return result;
}

TrainResult train(const CorpusManifest& manifest, const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                  const LossCallback& on_step) {
    if (manifest.context_length < net_cfg.context_length)
        throw ConfigError("manifest provides " + std::to_string(manifest.context_length) +
                          " context frames but the network needs T = " + std::to_string(net_cfg.context_length));
    std::vector<TemporalSample> samples(manifest.entries.size());
    std::vector<Subset> subsets(manifest.entries.size());
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        samples[i] = load_sample(manifest, i);
        subsets[i] = manifest.entries[i].subset;
    }
    return train(samples, subsets, net_cfg, train_cfg, on_step);
}

}  // namespace wasrt
