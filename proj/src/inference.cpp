#include "wasrt/inference.hpp"

#include <algorithm>
#include <chrono>

#include "wasrt/errors.hpp"

namespace wasrt {

EmbeddingBuffer init_buffer(const Embedding& first, int context_length) {
    if (context_length < 0) throw ConfigError("buffer length must be >= 0");
    EmbeddingBuffer b;
    b.capacity_ = context_length;
    b.slots_.assign(static_cast<std::size_t>(context_length), first);
    b.initialized_ = true;
    return b;
}

void EmbeddingBuffer::push(Embedding e) {
    if (capacity_ == 0) return;
    std::rotate(slots_.begin(), slots_.begin() + 1, slots_.end());
    slots_.back() = std::move(e);
}

StepOutput StreamingEngine::step(const Frame& frame) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t calls_before = net_->encode_calls();
    if (!frame_shape_.empty() && frame.image.shape() != frame_shape_)
        throw StreamError("frame " + std::to_string(timings_.size()) + " has shape " +
                          shape_string(frame.image.shape()) + ", stream started with " + shape_string(frame_shape_));

    const EncoderOutput enc = net_->encode(frame);
    Embedding emb = net_->project(enc.deep);
    if (!buffer_.initialized()) {
        buffer_ = init_buffer(emb, net_->config().context_length);
        frame_shape_ = frame.image.shape();
    }
    const ContextFeatures ctx = net_->aggregate_temporal(build_context_volume(buffer_.slots(), emb));
    StepOutput out;
    out.scores = net_->fuse_and_decode(emb, ctx, enc.skips);
    out.mask = argmax_mask(out.scores);
    buffer_.push(std::move(emb));

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timings_.push_back({static_cast<int>(timings_.size()), secs, net_->encode_calls() - calls_before});
    return out;
}

void StreamingEngine::reset() {
    buffer_ = EmbeddingBuffer{};
    frame_shape_.clear();
    timings_.clear();
}

TimingSummary summarize_timings(std::span<const StepTiming> timings) {
    TimingSummary s;
    if (timings.empty()) return s;
    std::vector<double> secs;
    for (const auto& t : timings) secs.push_back(t.seconds);
    double total = 0;
    for (double v : secs) total += v;
    s.mean_seconds = total / static_cast<double>(secs.size());
    s.max_seconds = *std::max_element(secs.begin(), secs.end());
    std::sort(secs.begin(), secs.end());
    s.median_seconds = secs[secs.size() / 2];
    s.frames_per_second = total > 0 ? static_cast<double>(secs.size()) / total : 0;
    return s;
}

SequenceOutput run_sequence(std::span<const Frame> frames, const Network& net) {
    if (frames.empty()) throw StreamError("run_sequence needs at least one frame");
    StreamingEngine engine(net);
    SequenceOutput out;
    for (const Frame& f : frames) out.masks.push_back(engine.step(f).mask);
    out.timings = engine.timings();
    out.summary = summarize_timings(out.timings);
    return out;
}

}  // namespace wasrt
