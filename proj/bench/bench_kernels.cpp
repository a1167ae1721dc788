// Times the serial reference kernels against the parallel ones on the layer
// shapes of the default network and checks that both agree.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <omp.h>

#include "wasrt/kernels.hpp"

using namespace wasrt;
namespace k = wasrt::kernels;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<Real> u(-1, 1);
    for (Real& v : t.values()) v = u(rng);
    return t;
}

double seconds_per_call(const std::function<void()>& fn, double budget = 0.3) {
    fn();  // warm-up
    int calls = 0;
    const auto start = std::chrono::steady_clock::now();
    double elapsed = 0;
    do {
        fn();
        ++calls;
        elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } while (elapsed < budget);
    return elapsed / calls;
}

void row(const std::string& name, const std::function<Real()>& ref, const std::function<Real()>& fast,
         const std::function<Real()>& diff) {
    const double t_ref = seconds_per_call([&] { ref(); });
    const double t_fast = seconds_per_call([&] { fast(); });
    std::printf("%-34s %10.3f %10.3f %8.2fx   max|diff| %.2e\n", name.c_str(), 1e3 * t_ref, 1e3 * t_fast,
                t_ref / t_fast, diff());
}

}  // namespace

int main() {
    std::mt19937_64 rng(7);
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-34s %10s %10s %9s\n", "kernel", "ref ms", "fast ms", "speedup");

    struct ConvCase {
        const char* name;
        int C, H, W, O, k, stride;
    };
    const ConvCase convs[] = {
        {"conv2d 3->8 48x80 s2", 3, 48, 80, 8, 3, 2},
        {"conv2d 8->8 24x40", 8, 24, 40, 8, 3, 1},
        {"conv2d 48->16 12x20 (decoder)", 48, 12, 20, 16, 3, 1},
        {"conv2d 8->3 48x80 (head)", 8, 48, 80, 3, 3, 1},
    };
    for (const auto& c : convs) {
        const Tensor in = random_tensor({c.C, c.H, c.W}, rng);
        const Tensor w = random_tensor({c.O, c.C, c.k, c.k}, rng);
        const Tensor b = random_tensor({c.O}, rng);
        const int pad = c.k / 2;
        row(std::string(c.name) + " fwd", [&] { return k::reference::conv2d(in, w, b, c.stride, pad)[0]; },
            [&] { return k::conv2d(in, w, b, c.stride, pad)[0]; },
            [&] { return max_abs_diff(k::reference::conv2d(in, w, b, c.stride, pad), k::conv2d(in, w, b, c.stride, pad)); });
        const Tensor gout = random_tensor(k::conv2d(in, w, b, c.stride, pad).shape(), rng);
        row(std::string(c.name) + " bwd",
            [&] { return k::reference::conv2d_backward(in, w, gout, c.stride, pad).weight[0]; },
            [&] { return k::conv2d_backward(in, w, gout, c.stride, pad).weight[0]; },
            [&] {
                const auto r = k::reference::conv2d_backward(in, w, gout, c.stride, pad);
                const auto f = k::conv2d_backward(in, w, gout, c.stride, pad);
                return std::max(max_abs_diff(r.weight, f.weight), max_abs_diff(r.input, f.input));
            });
    }

    for (int kk : {1, 3, 5}) {
        const Tensor vol = random_tensor({6, 16, 6, 10}, rng);
        const Tensor w = random_tensor({16, 16, 6, kk, kk}, rng);
        const Tensor b = random_tensor({16}, rng);
        const Tensor gout = random_tensor({16, 6, 10}, rng);
        const std::string name = "conv3d T=5 16ch 6x10 k=" + std::to_string(kk);
        row(name + " fwd", [&] { return k::reference::conv3d_temporal(vol, w, b)[0]; },
            [&] { return k::conv3d_temporal(vol, w, b)[0]; },
            [&] { return max_abs_diff(k::reference::conv3d_temporal(vol, w, b), k::conv3d_temporal(vol, w, b)); });
        row(name + " bwd", [&] { return k::reference::conv3d_temporal_backward(vol, w, gout).weight[0]; },
            [&] { return k::conv3d_temporal_backward(vol, w, gout).weight[0]; },
            [&] {
                const auto r = k::reference::conv3d_temporal_backward(vol, w, gout);
                const auto f = k::conv3d_temporal_backward(vol, w, gout);
                return std::max(max_abs_diff(r.weight, f.weight), max_abs_diff(r.input, f.input));
            });
    }

    const Tensor vol = random_tensor({6, 16, 24, 40}, rng);
    row("avgpool 3x3 T=5 16ch 24x40", [&] { return k::reference::temporal_avgpool(vol, 3)[0]; },
        [&] { return k::temporal_avgpool(vol, 3)[0]; },
        [&] { return max_abs_diff(k::reference::temporal_avgpool(vol, 3), k::temporal_avgpool(vol, 3)); });
    const Tensor small = random_tensor({32, 12, 20}, rng);
    row("upsample x2 32ch 12x20", [&] { return k::reference::upsample_nearest(small, 2)[0]; },
        [&] { return k::upsample_nearest(small, 2)[0]; },
        [&] { return max_abs_diff(k::reference::upsample_nearest(small, 2), k::upsample_nearest(small, 2)); });
    return 0;
}
