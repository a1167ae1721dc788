#include "wasrt/network.hpp"

#include <cmath>
#include <random>

#include "wasrt/errors.hpp"
#include "wasrt/kernels.hpp"

namespace wasrt {

namespace k = kernels;

std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::conv3d: return "conv3d";
        case Aggregation::avgpool_1x1: return "avgpool1";
        case Aggregation::avgpool_3x3: return "avgpool3";
    }
    return "?";
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "conv3d") return Aggregation::conv3d;
    if (s == "avgpool1" || s == "avgpool_1x1") return Aggregation::avgpool_1x1;
    if (s == "avgpool3" || s == "avgpool_3x3") return Aggregation::avgpool_3x3;
    throw ConfigError("unknown aggregation '" + s + "' (expected conv3d, avgpool1 or avgpool3)");
}

int NetworkConfig::total_stride() const {
    int s = 1;
    for (const auto& st : encoder) s *= st.stride;
    return s;
}

void NetworkConfig::validate() const {
    if (context_length < 0) throw ConfigError("context length T must be >= 0");
    if (deep_channels <= 0 || deep_channels % 2 != 0)
        throw ConfigError("deep channel count N must be a positive even number, got " + std::to_string(deep_channels));
    if (encoder.empty()) throw ConfigError("encoder needs at least one stage");
    for (const auto& st : encoder)
        if (st.channels <= 0 || st.stride < 1) throw ConfigError("encoder stage needs channels > 0 and stride >= 1");
    if (encoder.back().channels != deep_channels)
        throw ConfigError("last encoder stage has " + std::to_string(encoder.back().channels) +
                          " channels but N = " + std::to_string(deep_channels));
    if (num_classes != kNumClasses) throw ConfigError("num_classes must be 3");
    if (spatial_kernel != 1 && spatial_kernel != 3 && spatial_kernel != 5)
        throw ConfigError("spatial kernel must be 1, 3 or 5");
}

Gradients zero_gradients(const Parameters& params) {
    Gradients g;
    for (const auto& [name, t] : params) g.emplace(name, Tensor(t.shape()));
    return g;
}

void accumulate(Gradients& into, const Gradients& from) {
    for (const auto& [name, t] : from) {
        auto it = into.find(name);
        if (it == into.end())
            into.emplace(name, t);
        else
            it->second += t;
    }
}

// ------------------------------------------------------------ parameters

namespace {

std::string enc_name(std::size_t stage, const char* conv, const char* what) {
    return "encoder." + std::to_string(stage) + "." + conv + "." + what;
}
std::string dec_name(std::size_t level, const char* what) {
    return "decoder." + std::to_string(level) + "." + what;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

int merged_channels_into(const NetworkConfig& cfg, std::size_t level) {
    // channels of the upsampled tensor arriving at decoder merge `level`
    return level + 2 == cfg.encoder.size() ? cfg.deep_channels : cfg.encoder[level + 1].channels;
}

}  // namespace

std::map<std::string, std::vector<int>> Network::parameter_shapes(const NetworkConfig& cfg) {
    std::map<std::string, std::vector<int>> s;
    int in = 3;
    for (std::size_t i = 0; i < cfg.encoder.size(); ++i) {
        const int c = cfg.encoder[i].channels;
        s[enc_name(i, "strided", "weight")] = {c, in, 3, 3};
        s[enc_name(i, "strided", "bias")] = {c};
        s[enc_name(i, "refine", "weight")] = {c, c, 3, 3};
        s[enc_name(i, "refine", "bias")] = {c};
        in = c;
    }
    const int half = cfg.embedding_channels();
    s["projection.weight"] = {half, cfg.deep_channels, 1, 1};
    s["projection.bias"] = {half};
    if (cfg.aggregation == Aggregation::conv3d) {
        s["tcm.weight"] = {half, half, cfg.context_length + 1, cfg.spatial_kernel, cfg.spatial_kernel};
        s["tcm.bias"] = {half};
    }
    for (std::size_t level = 0; level + 1 < cfg.encoder.size(); ++level) {
        const int skip = cfg.encoder[level].channels;
        s[dec_name(level, "weight")] = {skip, merged_channels_into(cfg, level) + skip, 3, 3};
        s[dec_name(level, "bias")] = {skip};
    }
    const int head_in = cfg.encoder.size() > 1 ? cfg.encoder[0].channels : cfg.deep_channels;
    s["head.weight"] = {cfg.num_classes, head_in, 3, 3};
    s["head.bias"] = {cfg.num_classes};
    return s;
}

Network::Network(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const auto& [name, shape] : parameter_shapes(cfg_)) {
        Tensor t(shape);
        if (shape.size() > 1) {
            // Uniform(-b, b) with b = sqrt(6 / fan_in). Each tensor gets its own
            // stream keyed by name so shared layers start identical across configs.
            long fan_in = 1;
            for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
            const Real bound = std::sqrt(Real{6} / static_cast<Real>(fan_in));
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(fnv1a(name)), static_cast<std::uint32_t>(fnv1a(name) >> 32)};
            std::mt19937_64 rng(seq);
            std::uniform_real_distribution<Real> dist(-bound, bound);
            for (Real& v : t.values()) v = dist(rng);
        }
        params_.emplace(name, std::move(t));
    }
}

Network::Network(NetworkConfig cfg, Parameters params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    const auto shapes = parameter_shapes(cfg_);
    for (const auto& [name, shape] : shapes) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("parameter '" + name + "' missing");
        if (it->second.shape() != shape)
            throw ConfigError("parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                              ", config requires " + shape_string(shape));
    }
    if (params_.size() != shapes.size()) throw ConfigError("unexpected extra parameters for this config");
}

Network::Network(const Network& other)
    : cfg_(other.cfg_), params_(other.params_), encode_calls_(other.encode_calls()) {}

Network& Network::operator=(const Network& other) {
    cfg_ = other.cfg_;
    params_ = other.params_;
    encode_calls_.store(other.encode_calls());
    return *this;
}

const Tensor& Network::param(const std::string& name) const { return params_.at(name); }

// ---------------------------------------------------------------- forward

EncoderOutput Network::encode(const Frame& frame) const {
    encode_calls_.fetch_add(1, std::memory_order_relaxed);
    const int s = cfg_.total_stride();
    if (frame.image.rank() != 3 || frame.image.dim(0) != 3)
        throw ConfigError("encoder expects a 3-channel frame, got " + shape_string(frame.image.shape()));
    if (frame.height() % s != 0 || frame.width() % s != 0)
        throw ConfigError("frame " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                          " not divisible by total encoder stride " + std::to_string(s));
    EncoderOutput out;
    Tensor x = frame.image;
    for (std::size_t i = 0; i < cfg_.encoder.size(); ++i) {
        out.stage_inputs.push_back(x);
        Tensor a = k::conv2d(x, param(enc_name(i, "strided", "weight")), param(enc_name(i, "strided", "bias")),
                             cfg_.encoder[i].stride, 1);
        k::relu_inplace(a);
        Tensor b = k::conv2d(a, param(enc_name(i, "refine", "weight")), param(enc_name(i, "refine", "bias")), 1, 1);
        k::relu_inplace(b);
        out.first_conv_out.push_back(std::move(a));
        if (i + 1 < cfg_.encoder.size()) out.skips.push_back({b});
        x = std::move(b);
    }
    out.deep = {std::move(x)};
    return out;
}

Embedding Network::project(const FeatureMap& features) const {
    if (features.values.rank() != 3 || features.values.dim(0) != cfg_.deep_channels)
        throw ConfigError("projection expects " + std::to_string(cfg_.deep_channels) + " channels, got " +
                          shape_string(features.values.shape()));
    return {k::conv2d(features.values, param("projection.weight"), param("projection.bias"), 1, 0)};
}

ContextVolume build_context_volume(std::span<const Embedding> context, const Embedding& target) {
    const auto& shape = target.values.shape();
    for (std::size_t i = 0; i < context.size(); ++i)
        if (context[i].values.shape() != shape)
            throw ConfigError("context embedding " + std::to_string(i) + " has shape " +
                              shape_string(context[i].values.shape()) + ", target has " + shape_string(shape));
    std::vector<int> vshape{static_cast<int>(context.size()) + 1};
    vshape.insert(vshape.end(), shape.begin(), shape.end());
    ContextVolume v{Tensor(vshape)};
    for (std::size_t i = 0; i < context.size(); ++i)
        std::copy(context[i].values.values().begin(), context[i].values.values().end(),
                  v.values.slice(static_cast<int>(i)).begin());
    std::copy(target.values.values().begin(), target.values.values().end(),
              v.values.slice(static_cast<int>(context.size())).begin());
    return v;
}

ContextFeatures Network::aggregate_temporal(const ContextVolume& volume) const {
    if (volume.values.rank() != 4 || volume.depth() != cfg_.context_length + 1)
        throw ConfigError("context volume depth " +
                          std::to_string(volume.values.rank() == 4 ? volume.depth() : -1) +
                          " does not match configured T+1 = " + std::to_string(cfg_.context_length + 1));
    switch (cfg_.aggregation) {
        case Aggregation::conv3d: {
            Tensor out = k::conv3d_temporal(volume.values, param("tcm.weight"), param("tcm.bias"));
            k::relu_inplace(out);
            return {std::move(out)};
        }
        case Aggregation::avgpool_1x1: return {k::temporal_avgpool(volume.values, 1)};
        case Aggregation::avgpool_3x3: return {k::temporal_avgpool(volume.values, 3)};
    }
    throw ConfigError("unknown aggregation");
}

Tensor Network::decode_input(const Embedding& target, const ContextFeatures& context) const {
    if (target.values.shape() != context.values.shape())
        throw ConfigError("target embedding " + shape_string(target.values.shape()) + " and context features " +
                          shape_string(context.values.shape()) + " differ");
    Tensor x = k::concat_channels(target.values, context.values);
    if (x.dim(0) != cfg_.deep_channels)
        throw ConfigError("decoder input has " + std::to_string(x.dim(0)) + " channels, expected N = " +
                          std::to_string(cfg_.deep_channels));
    return x;
}

Tensor Network::fuse_and_decode(const Embedding& target, const ContextFeatures& context,
                                std::span<const FeatureMap> skips) const {
    if (skips.size() + 1 != cfg_.encoder.size())
        throw ConfigError("decoder expects " + std::to_string(cfg_.encoder.size() - 1) + " skip features, got " +
                          std::to_string(skips.size()));
    Tensor x = decode_input(target, context);
    for (std::size_t level = skips.size(); level-- > 0;) {
        const Tensor& skip = skips[level].values;
        const int f = cfg_.encoder[level + 1].stride;
        if (skip.dim(0) != cfg_.encoder[level].channels || skip.dim(1) != x.dim(1) * f || skip.dim(2) != x.dim(2) * f)
            throw ConfigError("skip feature " + std::to_string(level) + " has shape " + shape_string(skip.shape()));
        Tensor merged = k::concat_channels(k::upsample_nearest(x, f), skip);
        x = k::conv2d(merged, param(dec_name(level, "weight")), param(dec_name(level, "bias")), 1, 1);
        k::relu_inplace(x);
    }
    x = k::upsample_nearest(x, cfg_.encoder[0].stride);
    return k::conv2d(x, param("head.weight"), param("head.bias"), 1, 1);
}

Tensor Network::forward(const TemporalSample& sample) const {
    if (sample.context_length() != cfg_.context_length)
        throw ConfigError("sample has " + std::to_string(sample.context_length()) + " context frames, config T = " +
                          std::to_string(cfg_.context_length));
    EncoderOutput target = encode(sample.target);
    std::vector<Embedding> ctx;
    ctx.reserve(sample.context.size());
    for (const Frame& f : sample.context) {
        if (f.image.shape() != sample.target.image.shape())
            throw ConfigError("context frame " + std::to_string(f.frame_index) + " differs in size from target");
        ctx.push_back(project(encode(f).deep));
    }
    const Embedding target_emb = project(target.deep);
    const ContextFeatures c = aggregate_temporal(build_context_volume(ctx, target_emb));
    return fuse_and_decode(target_emb, c, target.skips);
}

// ------------------------------------------------------- trace / backward

ForwardTrace Network::forward_trace(const TemporalSample& sample, int grad_context_depth) const {
    if (sample.context_length() != cfg_.context_length)
        throw ConfigError("sample has " + std::to_string(sample.context_length()) + " context frames, config T = " +
                          std::to_string(cfg_.context_length));
    std::vector<SlotInput> slots;
    for (const Frame& f : sample.context) slots.push_back({&f, nullptr});
    slots.push_back({&sample.target, nullptr});
    return forward_trace(slots, grad_context_depth);
}

ForwardTrace Network::forward_trace(std::span<const SlotInput> slots, int grad_context_depth) const {
    const int T = cfg_.context_length;
    if (static_cast<int>(slots.size()) != T + 1)
        throw ConfigError("forward_trace needs T+1 = " + std::to_string(T + 1) + " slots");
    if (slots.back().frame == nullptr) throw ConfigError("target slot must be a frame");
    ForwardTrace tr;
    tr.frames.resize(slots.size());
    tr.encoder_grad.resize(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const int age = T - static_cast<int>(i);  // 0 = target, 1 = previous frame, ...
        if (slots[i].frame) {
            tr.frames[i] = encode(*slots[i].frame);
            tr.encoder_grad[i] = age <= grad_context_depth;
        } else {
            tr.frames[i].deep = *slots[i].features;
            tr.encoder_grad[i] = false;
        }
        tr.embeddings.push_back(project(tr.frames[i].deep));
    }
    tr.volume = build_context_volume(std::span(tr.embeddings).first(static_cast<std::size_t>(T)), tr.embeddings.back());
    tr.context = aggregate_temporal(tr.volume);
    tr.decoder_input = decode_input(tr.embeddings.back(), tr.context);

    const EncoderOutput& target = tr.frames.back();
    Tensor x = tr.decoder_input;
    for (std::size_t level = target.skips.size(); level-- > 0;) {
        Tensor merged = k::concat_channels(k::upsample_nearest(x, cfg_.encoder[level + 1].stride),
                                           target.skips[level].values);
        x = k::conv2d(merged, param(dec_name(level, "weight")), param(dec_name(level, "bias")), 1, 1);
        k::relu_inplace(x);
        tr.merge_inputs.insert(tr.merge_inputs.begin(), std::move(merged));
        tr.merge_outputs.insert(tr.merge_outputs.begin(), x);
    }
    tr.head_input = k::upsample_nearest(x, cfg_.encoder[0].stride);
    tr.scores = k::conv2d(tr.head_input, param("head.weight"), param("head.bias"), 1, 1);
    return tr;
}

BackwardResult Network::backward(const ForwardTrace& tr, const Tensor& grad_scores,
                                 const Tensor* grad_decoder_input) const {
    BackwardResult res;
    Gradients& g = res.grads;
    g = zero_gradients(params_);
    const std::size_t levels = cfg_.encoder.size() - 1;
    std::vector<Tensor> skip_grads(levels);

    // head and decoder merges
    auto head = k::conv2d_backward(tr.head_input, param("head.weight"), grad_scores, 1, 1);
    g["head.weight"] += head.weight;
    g["head.bias"] += head.bias;
    Tensor dx = k::upsample_nearest_backward(head.input, cfg_.encoder[0].stride);
    for (std::size_t level = 0; level < levels; ++level) {
        k::relu_backward_inplace(dx, tr.merge_outputs[level]);
        auto conv = k::conv2d_backward(tr.merge_inputs[level], param(dec_name(level, "weight")), dx, 1, 1);
        g[dec_name(level, "weight")] += conv.weight;
        g[dec_name(level, "bias")] += conv.bias;
        const int up_channels = merged_channels_into(cfg_, level);
        auto [d_up, d_skip] = k::split_channels(conv.input, up_channels);
        skip_grads[level] = std::move(d_skip);
        dx = k::upsample_nearest_backward(d_up, cfg_.encoder[level + 1].stride);
    }
    if (grad_decoder_input) dx += *grad_decoder_input;

    // temporal context module
    auto [d_target_emb, d_context] = k::split_channels(dx, cfg_.embedding_channels());
    const int depth = tr.volume.depth();
    switch (cfg_.aggregation) {
        case Aggregation::conv3d: {
            k::relu_backward_inplace(d_context, tr.context.values);
            auto c3 = k::conv3d_temporal_backward(tr.volume.values, param("tcm.weight"), d_context);
            g["tcm.weight"] += c3.weight;
            g["tcm.bias"] += c3.bias;
            res.volume_grad = std::move(c3.input);
            break;
        }
        case Aggregation::avgpool_1x1: res.volume_grad = k::temporal_avgpool_backward(d_context, depth, 1); break;
        case Aggregation::avgpool_3x3: res.volume_grad = k::temporal_avgpool_backward(d_context, depth, 3); break;
    }

    // projection (shared across slots) and encoder (only where allowed)
    for (int slot = 0; slot < depth; ++slot) {
        Tensor d_emb(tr.embeddings[static_cast<std::size_t>(slot)].values.shape());
        const auto vs = res.volume_grad.slice(slot);
        std::copy(vs.begin(), vs.end(), d_emb.data());
        if (slot == depth - 1) d_emb += d_target_emb;
        const EncoderOutput& enc = tr.frames[static_cast<std::size_t>(slot)];
        const bool into_encoder = tr.encoder_grad[static_cast<std::size_t>(slot)];
        auto proj = k::conv2d_backward(enc.deep.values, param("projection.weight"), d_emb, 1, 0, into_encoder);
        g["projection.weight"] += proj.weight;
        g["projection.bias"] += proj.bias;
        if (!into_encoder) continue;

        Tensor d = std::move(proj.input);
        const bool is_target = slot == depth - 1;
        for (std::size_t i = cfg_.encoder.size(); i-- > 0;) {
            if (is_target && i < levels) d += skip_grads[i];
            const Tensor& stage_out = i + 1 < cfg_.encoder.size() ? enc.skips[i].values : enc.deep.values;
            k::relu_backward_inplace(d, stage_out);
            auto refine = k::conv2d_backward(enc.first_conv_out[i], param(enc_name(i, "refine", "weight")), d, 1, 1);
            g[enc_name(i, "refine", "weight")] += refine.weight;
            g[enc_name(i, "refine", "bias")] += refine.bias;
            k::relu_backward_inplace(refine.input, enc.first_conv_out[i]);
            auto strided = k::conv2d_backward(enc.stage_inputs[i], param(enc_name(i, "strided", "weight")),
                                              refine.input, cfg_.encoder[i].stride, 1, i > 0);
            g[enc_name(i, "strided", "weight")] += strided.weight;
            g[enc_name(i, "strided", "bias")] += strided.bias;
            d = std::move(strided.input);
        }
    }
    return res;
}

SegmentationMask argmax_mask(const Tensor& scores) {
    const int C = scores.dim(0), H = scores.dim(1), W = scores.dim(2);
    SegmentationMask m(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int best = 0;
            for (int c = 1; c < C; ++c)
                if (scores.at(c, y, x) > scores.at(best, y, x)) best = c;
            m(y, x) = static_cast<std::uint8_t>(best);
        }
    return m;
}

}  // namespace wasrt
