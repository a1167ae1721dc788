#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "wasrt/checkpoint.hpp"
#include "wasrt/errors.hpp"
#include "wasrt/network.hpp"

using namespace wasrt;
using testing::random_sample;
using testing::random_tensor;
using testing::toy_config;
using testing::check_parameter;
using testing::GradCheck;


TEST_CASE("shape and channel suite over N, T and spatial kernel") {
    std::mt19937_64 rng(11);
    for (int N : {8, 16, 64})
        for (int T : {0, 1, 3, 5})
            for (int kk : {1, 3, 5}) {
                NetworkConfig cfg;
                cfg.context_length = T;
                cfg.deep_channels = N;
                cfg.encoder = {{4, 2}, {N, 2}};
                cfg.spatial_kernel = kk;
                const Network net(cfg, 3);
                const TemporalSample s = random_sample(T, 16, 16, rng);
                const ForwardTrace tr = net.forward_trace(s, std::min(1, T));
                CAPTURE(N);
                CAPTURE(T);
                CAPTURE(kk);
                CHECK(tr.frames.back().deep.values.shape() == std::vector<int>{N, 4, 4});
                CHECK(tr.embeddings.back().values.shape() == std::vector<int>{N / 2, 4, 4});
                CHECK(tr.volume.depth() == T + 1);
                CHECK(tr.volume.values.shape() == std::vector<int>{T + 1, N / 2, 4, 4});
                CHECK(tr.context.values.shape() == std::vector<int>{N / 2, 4, 4});
                CHECK(tr.decoder_input.dim(0) == N);
                CHECK(tr.scores.shape() == std::vector<int>{kNumClasses, 16, 16});
                CHECK(net.params().at("tcm.weight").shape() == std::vector<int>{N / 2, N / 2, T + 1, kk, kk});
            }
}

TEST_CASE("average-pool aggregation preserves h x w and has no parameters") {
    std::mt19937_64 rng(12);
    for (Aggregation a : {Aggregation::avgpool_1x1, Aggregation::avgpool_3x3}) {
        const Network net(toy_config(3, a), 1);
        CHECK(net.params().count("tcm.weight") == 0);
        const ForwardTrace tr = net.forward_trace(random_sample(3, 16, 12, rng), 1);
        CHECK(tr.context.values.shape() == std::vector<int>{4, 4, 3});
        CHECK(tr.decoder_input.dim(0) == 8);
    }
}

TEST_CASE("configuration validation") {
    NetworkConfig odd = toy_config(2);
    odd.deep_channels = 7;
    odd.encoder.back().channels = 7;
    CHECK_THROWS_AS(Network(odd, 0), ConfigError);
    NetworkConfig mismatch = toy_config(2);
    mismatch.deep_channels = 16;
    CHECK_THROWS_AS(mismatch.validate(), ConfigError);
    NetworkConfig even_kernel = toy_config(2);
    even_kernel.spatial_kernel = 2;
    CHECK_THROWS_AS(even_kernel.validate(), ConfigError);
    NetworkConfig negative = toy_config(2);
    negative.context_length = -1;
    CHECK_THROWS_AS(negative.validate(), ConfigError);
    CHECK(aggregation_from_string("avgpool1") == Aggregation::avgpool_1x1);
    CHECK(aggregation_from_string("avgpool_3x3") == Aggregation::avgpool_3x3);
    CHECK_THROWS_AS(aggregation_from_string("max"), ConfigError);
}

TEST_CASE("frames that are too small or mismatched are rejected") {
    std::mt19937_64 rng(13);
    const Network net(toy_config(1), 0);
    TemporalSample s = random_sample(1, 16, 16, rng);
    s.context[0] = testing::random_frame(16, 12, rng);
    CHECK_THROWS(net.forward(s));
    CHECK_THROWS_AS(net.forward(random_sample(2, 16, 16, rng)), ConfigError);
    CHECK_THROWS(net.forward(random_sample(1, 6, 6, rng)));
}

TEST_CASE("initialization is seeded per tensor name") {
    const Network a(toy_config(5), 42), b(toy_config(5), 42), c(toy_config(5), 43);
    CHECK(a.params() == b.params());
    CHECK(a.params().at("encoder.0.strided.weight") != c.params().at("encoder.0.strided.weight"));
    // layers shared between configurations start from the same values
    const Network single(toy_config(0), 42);
    CHECK(single.params().at("encoder.1.refine.weight") == a.params().at("encoder.1.refine.weight"));
    CHECK(single.params().at("projection.weight") == a.params().at("projection.weight"));
    for (const auto& [name, t] : a.params())
        if (name.ends_with(".bias")) CHECK(squared_norm(t.values()) == 0);
}

TEST_CASE("analytic gradients of the 3D convolution and projection match central differences") {
    std::mt19937_64 rng(14);
    for (int T : {1, 2}) {
        Network net(toy_config(T), 5);
        const TemporalSample s = random_sample(T, 8, 8, rng);
        const ForwardTrace tr = net.forward_trace(s, T);
        const Tensor R = random_tensor(tr.scores.shape(), rng);
        const Gradients g = net.backward(tr, R).grads;
        for (const char* name : {"tcm.weight", "tcm.bias", "projection.weight", "projection.bias"}) {
            const GradCheck r = check_parameter(net, s, R, g, name, 40, rng);
            CAPTURE(name);
            CHECK(r.checked > 0);
            CHECK(r.tiny_mismatches == 0);
            CHECK(r.worst_relative <= 1e-3);
        }
    }
}

TEST_CASE("every parameter gradient matches central differences with full encoder gradients") {
    std::mt19937_64 rng(15);
    for (Aggregation agg : {Aggregation::conv3d, Aggregation::avgpool_3x3}) {
        Network net(toy_config(2, agg, 3), 6);
        const TemporalSample s = random_sample(2, 8, 8, rng);
        const ForwardTrace tr = net.forward_trace(s, 2);
        const Tensor R = random_tensor(tr.scores.shape(), rng);
        const Gradients g = net.backward(tr, R).grads;
        CHECK(g.size() == net.params().size());
        for (const auto& [name, _] : net.params()) {
            const GradCheck r = check_parameter(net, s, R, g, name, 12, rng);
            CAPTURE(name);
            CHECK(r.tiny_mismatches == 0);
            CHECK(r.worst_relative <= 1e-3);
        }
    }
}

TEST_CASE("gradient restriction: detached old context frames leave encoder gradients unchanged") {
    std::mt19937_64 rng(16);
    const int T = 4, depth = 1;
    const Network net(toy_config(T), 7);
    const TemporalSample s = random_sample(T, 12, 12, rng);

    const ForwardTrace restricted = net.forward_trace(s, depth);
    // same pass with the old context slots supplied as precomputed constants
    std::vector<FeatureMap> constants;
    for (int i = 0; i < T - depth; ++i) constants.push_back(net.encode(s.context[static_cast<std::size_t>(i)]).deep);
    std::vector<Network::SlotInput> slots;
    for (int i = 0; i < T; ++i)
        slots.push_back(i < T - depth ? Network::SlotInput{nullptr, &constants[static_cast<std::size_t>(i)]}
                                      : Network::SlotInput{&s.context[static_cast<std::size_t>(i)], nullptr});
    slots.push_back({&s.target, nullptr});
    const ForwardTrace detached = net.forward_trace(slots, depth);

    CHECK(max_abs_diff(restricted.scores, detached.scores) <= 1e-12);
    const Tensor R = random_tensor(restricted.scores.shape(), rng);
    const BackwardResult a = net.backward(restricted, R);
    const BackwardResult b = net.backward(detached, R);
    for (const auto& [name, g] : a.grads) {
        CAPTURE(name);
        CHECK(max_abs_diff(g, b.grads.at(name)) <= 1e-6);
    }
    // the temporal module still receives gradient for the detached slices
    for (int i = 0; i < T - depth; ++i) CHECK(squared_norm(a.volume_grad.slice(i)) > 0);

    // and the restriction matters: full-depth encoder gradients differ
    const BackwardResult full = net.backward(net.forward_trace(s, T), R);
    CHECK(max_abs_diff(full.grads.at("encoder.0.strided.weight"), a.grads.at("encoder.0.strided.weight")) > 1e-9);
    CHECK(max_abs_diff(full.grads.at("tcm.weight"), a.grads.at("tcm.weight")) <= 1e-12);
}

TEST_CASE("the encoder is invoked once per frame slot") {
    std::mt19937_64 rng(17);
    Network net(toy_config(3), 1);
    net.forward(random_sample(3, 8, 8, rng));
    CHECK(net.encode_calls() == 4);
    net.reset_encode_calls();
    CHECK(net.encode_calls() == 0);
}

TEST_CASE("checkpoint round trip is bit exact") {
    std::mt19937_64 rng(18);
    const Network net(toy_config(2, Aggregation::conv3d, 5), 9);
    const auto dir = testing::scratch_dir("checkpoint");
    save_checkpoint(net, dir / "net.json");
    const Network loaded = load_checkpoint(dir / "net.json");
    CHECK(loaded.config() == net.config());
    CHECK(loaded.params() == net.params());
    const TemporalSample s = random_sample(2, 8, 8, rng);
    CHECK(max_abs_diff(loaded.forward(s), net.forward(s)) == 0);

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), IoError);
    std::ofstream(dir / "bad.json") << "{\"format\":\"other\"}";
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), SchemaError);
    Parameters wrong = net.params();
    wrong.erase("head.bias");
    CHECK_THROWS_AS(Network(net.config(), wrong), ConfigError);
}

TEST_CASE("argmax mask picks the highest score per pixel") {
    Tensor scores({3, 1, 3});
    scores.at(0, 0, 0) = 1;
    scores.at(1, 0, 1) = 1;
    scores.at(2, 0, 2) = 1;
    const SegmentationMask m = argmax_mask(scores);
    CHECK(m.label(0, 0) == Label::obstacle);
    CHECK(m.label(0, 1) == Label::water);
    CHECK(m.label(0, 2) == Label::sky);
}
