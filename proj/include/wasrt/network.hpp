#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wasrt/datamodel.hpp"
#include "wasrt/tensor.hpp"

namespace wasrt {

enum class Aggregation { conv3d, avgpool_1x1, avgpool_3x3 };
std::string to_string(Aggregation a);
/// Accepts "conv3d", "avgpool1"/"avgpool_1x1", "avgpool3"/"avgpool_3x3".
Aggregation aggregation_from_string(const std::string& s);

struct EncoderStage {
    int channels = 0;
    int stride = 1;
    friend bool operator==(const EncoderStage&, const EncoderStage&) = default;
};

struct NetworkConfig {
    int context_length = 5;   // T
    int deep_channels = 32;   // N; must equal the last encoder stage's channels
    std::vector<EncoderStage> encoder{{8, 2}, {16, 2}, {32, 2}};
    int num_classes = kNumClasses;
    Aggregation aggregation = Aggregation::conv3d;
    int spatial_kernel = 3;

    int embedding_channels() const { return deep_channels / 2; }
    int total_stride() const;
    /// Throws ConfigError on any violated invariant.
    void validate() const;
    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Value types flowing through the network. All are [C][h][w] except the volume.
struct FeatureMap {
    Tensor values;
};
struct Embedding {
    Tensor values;
};
struct ContextVolume {
    Tensor values;  // [T+1][N/2][h][w], context oldest first, target last
    int depth() const { return values.dim(0); }
};
struct ContextFeatures {
    Tensor values;
};

/// Named parameter tensors, ordered by name.
using Parameters = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

Gradients zero_gradients(const Parameters& params);
void accumulate(Gradients& into, const Gradients& from);

struct EncoderOutput {
    FeatureMap deep;
    std::vector<FeatureMap> skips;       // one per stage except the last, shallow first
    std::vector<Tensor> stage_inputs;    // cached for backward
    std::vector<Tensor> first_conv_out;  // post-ReLU output of each stage's strided conv
};

/// Intermediate values of one full forward pass, kept for backward.
struct ForwardTrace {
    std::vector<EncoderOutput> frames;     // T+1 slots; context oldest first, target last
    std::vector<bool> encoder_grad;        // per slot: propagate into the encoder?
    std::vector<Embedding> embeddings;     // per slot
    ContextVolume volume;
    ContextFeatures context;               // post-nonlinearity
    Tensor decoder_input;                  // concat(target embedding, context) [N][h][w]
    std::vector<Tensor> merge_inputs;      // per decoder merge: concat(upsampled, skip)
    std::vector<Tensor> merge_outputs;     // post-ReLU
    Tensor head_input;
    Tensor scores;                         // [classes][H][W]
};

struct BackwardResult {
    Gradients grads;
    Tensor volume_grad;   // d loss / d context volume
};

class Network {
public:
    Network(NetworkConfig cfg, std::uint64_t seed);
    /// Validates every parameter shape against cfg.
    Network(NetworkConfig cfg, Parameters params);
    Network(const Network& other);
    Network& operator=(const Network& other);

    const NetworkConfig& config() const noexcept { return cfg_; }
    const Parameters& params() const noexcept { return params_; }
    Parameters& params() noexcept { return params_; }

    /// Expected parameter names and shapes for a config.
    static std::map<std::string, std::vector<int>> parameter_shapes(const NetworkConfig& cfg);

    EncoderOutput encode(const Frame& frame) const;
    Embedding project(const FeatureMap& features) const;
    ContextFeatures aggregate_temporal(const ContextVolume& volume) const;
    Tensor fuse_and_decode(const Embedding& target, const ContextFeatures& context,
                           std::span<const FeatureMap> skips) const;
    Tensor forward(const TemporalSample& sample) const;

    /// Full pass keeping intermediates. Slots older than the most recent
    /// `grad_context_depth` context frames are encoded without gradient.
    /// A slot may be supplied as precomputed features (treated as constants).
    struct SlotInput {
        const Frame* frame = nullptr;
        const FeatureMap* features = nullptr;
    };
    ForwardTrace forward_trace(std::span<const SlotInput> slots, int grad_context_depth) const;
    ForwardTrace forward_trace(const TemporalSample& sample, int grad_context_depth) const;

    /// Backpropagate d loss / d scores (plus an optional extra gradient on the
    /// decoder input) through the trace.
    BackwardResult backward(const ForwardTrace& trace, const Tensor& grad_scores,
                            const Tensor* grad_decoder_input = nullptr) const;

    /// Number of encode() invocations since construction or the last reset.
    std::uint64_t encode_calls() const noexcept { return encode_calls_.load(std::memory_order_relaxed); }
    void reset_encode_calls() noexcept { encode_calls_.store(0, std::memory_order_relaxed); }

private:
    const Tensor& param(const std::string& name) const;
    Tensor decode_input(const Embedding& target, const ContextFeatures& context) const;

    NetworkConfig cfg_;
    Parameters params_;
    mutable std::atomic<std::uint64_t> encode_calls_{0};
};

ContextVolume build_context_volume(std::span<const Embedding> context, const Embedding& target);

/// Per-pixel argmax over class scores.
SegmentationMask argmax_mask(const Tensor& scores);

}  // namespace wasrt
