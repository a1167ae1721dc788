#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "wasrt/kernels.hpp"

using namespace wasrt;
namespace k = wasrt::kernels;
using testing::random_tensor;

namespace {

// Directly evaluates one output element of a 2D convolution from its definition.
Real conv2d_at(const Tensor& in, const Tensor& w, const Tensor& b, int stride, int pad, int o, int oy, int ox) {
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2), kk = w.dim(2);
    Real acc = b.empty() ? 0 : b[static_cast<std::size_t>(o)];
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kk; ++ky)
            for (int kx = 0; kx < kk; ++kx) {
                const int y = oy * stride + ky - pad, x = ox * stride + kx - pad;
                if (y < 0 || y >= H || x < 0 || x >= W) continue;
                acc += w[((static_cast<std::size_t>(o) * C + c) * kk + ky) * kk + kx] * in.at(c, y, x);
            }
    return acc;
}

// <a, b> over all elements
Real dot(const Tensor& a, const Tensor& b) {
    Real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("conv2d: reference matches the defining sum") {
    std::mt19937_64 rng(1);
    for (int stride : {1, 2})
        for (int kk : {1, 3, 5}) {
            const Tensor in = random_tensor({3, 7, 9}, rng);
            const Tensor w = random_tensor({4, 3, kk, kk}, rng);
            const Tensor b = random_tensor({4}, rng);
            const int pad = kk / 2;
            const Tensor out = k::reference::conv2d(in, w, b, stride, pad);
            for (int o = 0; o < out.dim(0); ++o)
                for (int y = 0; y < out.dim(1); ++y)
                    for (int x = 0; x < out.dim(2); ++x)
                        CHECK(out.at(o, y, x) == doctest::Approx(conv2d_at(in, w, b, stride, pad, o, y, x)).epsilon(1e-12));
        }
}

TEST_CASE("conv2d: parallel and reference paths agree") {
    std::mt19937_64 rng(2);
    struct Case {
        int C, H, W, O, k, stride, pad;
    };
    for (const Case c : {Case{3, 48, 80, 8, 3, 2, 1}, Case{8, 24, 40, 8, 3, 1, 1}, Case{5, 7, 11, 6, 1, 1, 0},
                         Case{4, 9, 6, 3, 5, 2, 2}, Case{2, 5, 5, 2, 3, 1, 0}, Case{48, 12, 20, 16, 3, 1, 1}}) {
        const Tensor in = random_tensor({c.C, c.H, c.W}, rng);
        const Tensor w = random_tensor({c.O, c.C, c.k, c.k}, rng);
        const Tensor b = random_tensor({c.O}, rng);
        const Tensor ref = k::reference::conv2d(in, w, b, c.stride, c.pad);
        const Tensor fast = k::conv2d(in, w, b, c.stride, c.pad);
        REQUIRE(ref.shape() == fast.shape());
        CHECK(max_abs_diff(ref, fast) <= 1e-10);

        const Tensor gout = random_tensor(ref.shape(), rng);
        const auto gr = k::reference::conv2d_backward(in, w, gout, c.stride, c.pad);
        const auto gf = k::conv2d_backward(in, w, gout, c.stride, c.pad);
        CHECK(max_abs_diff(gr.weight, gf.weight) <= 1e-10);
        CHECK(max_abs_diff(gr.bias, gf.bias) <= 1e-10);
        CHECK(max_abs_diff(gr.input, gf.input) <= 1e-10);
        CHECK(k::conv2d_backward(in, w, gout, c.stride, c.pad, false).input.empty());
    }
}

TEST_CASE("conv2d backward is the adjoint of the forward map") {
    std::mt19937_64 rng(3);
    const Tensor in = random_tensor({3, 9, 10}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    const Tensor zero_bias({4});
    const Tensor out = k::reference::conv2d(in, w, zero_bias, 2, 1);
    const Tensor gout = random_tensor(out.shape(), rng);
    const auto g = k::reference::conv2d_backward(in, w, gout, 2, 1);
    // the map is bilinear in (in, w): <gout, conv(in, w)> = <g.input, in> = <g.weight, w>
    CHECK(dot(g.input, in) == doctest::Approx(dot(gout, out)).epsilon(1e-10));
    CHECK(dot(g.weight, w) == doctest::Approx(dot(gout, out)).epsilon(1e-10));
}

TEST_CASE("conv3d over the full temporal extent: paths agree and preserve h x w") {
    std::mt19937_64 rng(4);
    for (int D : {1, 2, 4, 6})
        for (int kk : {1, 3, 5}) {
            const Tensor vol = random_tensor({D, 4, 6, 7}, rng);
            const Tensor w = random_tensor({4, 4, D, kk, kk}, rng);
            const Tensor b = random_tensor({4}, rng);
            const Tensor ref = k::reference::conv3d_temporal(vol, w, b);
            const Tensor fast = k::conv3d_temporal(vol, w, b);
            CHECK(ref.shape() == std::vector<int>{4, 6, 7});
            CHECK(max_abs_diff(ref, fast) <= 1e-10);
            const Tensor gout = random_tensor(ref.shape(), rng);
            const auto gr = k::reference::conv3d_temporal_backward(vol, w, gout);
            const auto gf = k::conv3d_temporal_backward(vol, w, gout);
            CHECK(max_abs_diff(gr.weight, gf.weight) <= 1e-10);
            CHECK(max_abs_diff(gr.bias, gf.bias) <= 1e-10);
            CHECK(max_abs_diff(gr.input, gf.input) <= 1e-10);
        }
}

TEST_CASE("conv3d with a single-slot volume equals conv2d") {
    std::mt19937_64 rng(5);
    const Tensor vol = random_tensor({1, 3, 5, 6}, rng);
    const Tensor w3 = random_tensor({2, 3, 1, 3, 3}, rng);
    const Tensor b = random_tensor({2}, rng);
    Tensor in({3, 5, 6});
    std::copy(vol.values().begin(), vol.values().end(), in.data());
    Tensor w2({2, 3, 3, 3});
    std::copy(w3.values().begin(), w3.values().end(), w2.data());
    CHECK(max_abs_diff(k::conv3d_temporal(vol, w3, b), k::conv2d(in, w2, b, 1, 1)) <= 1e-12);
}

TEST_CASE("temporal average pooling") {
    std::mt19937_64 rng(6);
    SUBCASE("1x1 window is the temporal mean") {
        const Tensor vol = random_tensor({3, 2, 4, 5}, rng);
        const Tensor out = k::temporal_avgpool(vol, 1);
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 5; ++x) {
                    Real m = 0;
                    for (int d = 0; d < 3; ++d) m += vol[((static_cast<std::size_t>(d) * 2 + c) * 4 + y) * 5 + x];
                    CHECK(out.at(c, y, x) == doctest::Approx(m / 3).epsilon(1e-12));
                }
    }
    SUBCASE("3x3 window divides by the full window size at the border") {
        const Tensor vol({2, 1, 3, 3}, 1.0);
        const Tensor out = k::temporal_avgpool(vol, 3);
        CHECK(out.at(0, 1, 1) == doctest::Approx(1.0));
        CHECK(out.at(0, 0, 0) == doctest::Approx(4.0 / 9.0));
        CHECK(out.at(0, 0, 1) == doctest::Approx(6.0 / 9.0));
    }
    SUBCASE("paths agree, backward is the adjoint") {
        for (int s : {1, 3}) {
            const Tensor vol = random_tensor({4, 3, 6, 5}, rng);
            const Tensor out = k::temporal_avgpool(vol, s);
            CHECK(max_abs_diff(out, k::reference::temporal_avgpool(vol, s)) <= 1e-12);
            const Tensor gout = random_tensor(out.shape(), rng);
            const Tensor g = k::temporal_avgpool_backward(gout, 4, s);
            CHECK(max_abs_diff(g, k::reference::temporal_avgpool_backward(gout, 4, s)) <= 1e-12);
            CHECK(dot(g, vol) == doctest::Approx(dot(gout, out)).epsilon(1e-10));
        }
    }
}

TEST_CASE("nearest upsampling and its adjoint") {
    std::mt19937_64 rng(7);
    const Tensor in = random_tensor({2, 3, 4}, rng);
    const Tensor up = k::upsample_nearest(in, 2);
    CHECK(up.shape() == std::vector<int>{2, 6, 8});
    CHECK(up.at(1, 5, 7) == in.at(1, 2, 3));
    CHECK(max_abs_diff(up, k::reference::upsample_nearest(in, 2)) == 0);
    const Tensor gout = random_tensor(up.shape(), rng);
    const Tensor g = k::upsample_nearest_backward(gout, 2);
    CHECK(max_abs_diff(g, k::reference::upsample_nearest_backward(gout, 2)) <= 1e-12);
    CHECK(dot(g, in) == doctest::Approx(dot(gout, up)).epsilon(1e-10));
}

TEST_CASE("channel concat and split are inverse") {
    std::mt19937_64 rng(8);
    const Tensor a = random_tensor({2, 3, 3}, rng), b = random_tensor({5, 3, 3}, rng);
    const auto [a2, b2] = k::split_channels(k::concat_channels(a, b), 2);
    CHECK(a2 == a);
    CHECK(b2 == b);
    CHECK_THROWS(k::concat_channels(a, random_tensor({1, 2, 3}, rng)));
}

TEST_CASE("mismatched weight shapes are rejected") {
    std::mt19937_64 rng(9);
    const Tensor in = random_tensor({3, 5, 5}, rng);
    CHECK_THROWS_AS(k::conv2d(in, random_tensor({2, 4, 3, 3}, rng), Tensor{}, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(k::conv3d_temporal(random_tensor({2, 3, 5, 5}, rng), random_tensor({2, 3, 3, 3, 3}, rng), Tensor{}),
                    std::invalid_argument);
}
