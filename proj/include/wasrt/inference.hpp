#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wasrt/datamodel.hpp"
#include "wasrt/network.hpp"

namespace wasrt {

/// The T most recent projected frame embeddings, oldest first.
class EmbeddingBuffer {
public:
    EmbeddingBuffer() = default;

    std::span<const Embedding> slots() const noexcept { return slots_; }
    int capacity() const noexcept { return capacity_; }
    bool initialized() const noexcept { return initialized_; }

    /// Appends `e` and evicts the oldest slot; no-op for T = 0.
    void push(Embedding e);

private:
    friend EmbeddingBuffer init_buffer(const Embedding& first, int context_length);
    std::vector<Embedding> slots_;
    int capacity_ = 0;
    bool initialized_ = false;
};

/// Buffer holding `context_length` copies of the first frame's embedding.
EmbeddingBuffer init_buffer(const Embedding& first, int context_length);

struct StepTiming {
    int frame = 0;               // position in the stream, 0-based
    double seconds = 0;
    std::uint64_t encoder_calls = 0;  // encoder invocations during this step
};

struct StepOutput {
    SegmentationMask mask;
    Tensor scores;
};

/// Sequential per-frame inference. Each step encodes only the new frame, reads
/// the buffer as context, then pushes the new embedding. One engine per stream;
/// the network is shared read-only and may back several engines.
class StreamingEngine {
public:
    explicit StreamingEngine(const Network& net) : net_(&net) {}

    StepOutput step(const Frame& frame);

    const EmbeddingBuffer& buffer() const noexcept { return buffer_; }
    const std::vector<StepTiming>& timings() const noexcept { return timings_; }
    void reset();

private:
    const Network* net_;
    EmbeddingBuffer buffer_;
    std::vector<int> frame_shape_;
    std::vector<StepTiming> timings_;
};

struct TimingSummary {
    double mean_seconds = 0;
    double median_seconds = 0;
    double max_seconds = 0;
    double frames_per_second = 0;
};

struct SequenceOutput {
    std::vector<SegmentationMask> masks;
    std::vector<StepTiming> timings;  // one record per frame
    TimingSummary summary;
};

/// Folds StreamingEngine::step over the frames.
SequenceOutput run_sequence(std::span<const Frame> frames, const Network& net);

TimingSummary summarize_timings(std::span<const StepTiming> timings);

}  // namespace wasrt
