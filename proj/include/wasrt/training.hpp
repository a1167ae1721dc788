#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "wasrt/datamodel.hpp"
#include "wasrt/network.hpp"

namespace wasrt {

/// Step decay: rate = base * gamma^(epoch / step_epochs).
struct LearningRateSchedule {
    double base = 2e-3;
    int step_epochs = 15;
    double gamma = 0.3;

    double at(int epoch) const;
    friend bool operator==(const LearningRateSchedule&, const LearningRateSchedule&) = default;
};

struct AugmentConfig {
    bool horizontal_flip = true;
    double flip_probability = 0.5;
    bool photometric = true;
    double brightness = 0.08;  // additive offset drawn from [-b, b]
    double contrast = 0.15;    // gain drawn from [1-c, 1+c]
    friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct TrainConfig {
    int epochs = 40;
    int batch_size = 4;
    int steps_per_epoch = 0;  // 0: ceil(corpus size / batch size)
    LearningRateSchedule learning_rate;
    std::uint64_t seed = 0;
    double separation_loss_weight = 0.01;
    AugmentConfig augmentation;
    int grad_context_depth = 1;  // clamped to T
    bool equal_subset_sampling = true;

    /// Throws ConfigError.
    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ------------------------------------------------------------------ loss

struct LossTerms {
    double total = 0;
    double cross_entropy = 0;
    double separation = 0;
    Tensor grad_scores;         // d total / d scores
    Tensor grad_decoder_input;  // d total / d decoder input (empty without features)
};

/// Mean per-pixel cross-entropy plus `separation_weight` times the water/obstacle
/// feature-separation term computed on `decoder_input` ([N][h][w], may be null).
/// The separation term is the squared cosine similarity between the mean water
/// feature vector and the mean obstacle feature vector, using the ground truth
/// sampled at the centre of each feature cell; it is 0 when either class is
/// absent.
LossTerms segmentation_loss(const Tensor& scores, const SegmentationMask& gt, const Tensor* decoder_input = nullptr,
                            double separation_weight = 0.0);

// --------------------------------------------------------------- sampling

/// Draws training indices: a fair coin picks the base or extension subset,
/// then an index is drawn uniformly within it.
class BatchSampler {
public:
    BatchSampler(std::vector<std::size_t> base, std::vector<std::size_t> extension, std::uint64_t seed);

    std::vector<std::size_t> sample(int k);

private:
    std::vector<std::size_t> base_;
    std::vector<std::size_t> extension_;
    std::mt19937_64 rng_;
};

// ------------------------------------------------- gradient restriction

/// Same values as Network::forward; the trace records that encoder gradients
/// flow only through the target and the `grad_context_depth` newest context frames.
ForwardTrace restricted_forward(const Network& net, const TemporalSample& sample, int grad_context_depth = 1);

// ------------------------------------------------------------ augmentation

struct AugmentDraw {
    bool flip = false;
    double brightness = 0.0;
    double contrast = 1.0;
};

AugmentDraw draw_augmentation(std::mt19937_64& rng, const AugmentConfig& cfg);
/// Applies one draw identically to target, every context frame and the annotation.
TemporalSample apply_augmentation(const TemporalSample& sample, const AugmentDraw& draw);
TemporalSample augment(const TemporalSample& sample, std::mt19937_64& rng, const AugmentConfig& cfg);

/// Keep only the newest `context_length` context frames (padding by repeating
/// the oldest frame when the sample has fewer).
TemporalSample with_context_length(const TemporalSample& sample, int context_length);

// ---------------------------------------------------------------- optimizer

class AdamOptimizer {
public:
    explicit AdamOptimizer(const Parameters& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Parameters& params, const Gradients& grads, double learning_rate);

private:
    Gradients m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

// ------------------------------------------------------------------- loop

struct LossRecord {
    int step = 0;
    int epoch = 0;
    double total = 0;
    double cross_entropy = 0;
    double separation = 0;
    double learning_rate = 0;
};

struct TrainResult {
    Network network;
    std::vector<LossRecord> curve;
};

/// Called after every optimizer step; used for the append-only loss log.
using LossCallback = std::function<void(const LossRecord&)>;

/// Trains on in-memory samples. `subsets[i]` tags samples[i]. Samples may carry
/// more context than the network's T; the newest T frames are used.
TrainResult train(const std::vector<TemporalSample>& samples, const std::vector<Subset>& subsets,
                  const NetworkConfig& net_cfg, const TrainConfig& train_cfg, const LossCallback& on_step = {});

/// Loads every manifest entry and trains on it.
TrainResult train(const CorpusManifest& manifest, const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                  const LossCallback& on_step = {});

}  // namespace wasrt
