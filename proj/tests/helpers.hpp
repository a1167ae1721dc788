#pragma once

#include <random>
#include <string>
#include <vector>

#include "wasrt/datamodel.hpp"
#include "wasrt/network.hpp"
#include "wasrt/tensor.hpp"

namespace testing {

inline wasrt::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
    wasrt::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

inline wasrt::Frame random_frame(int h, int w, std::mt19937_64& rng, int index = 0) {
    return wasrt::Frame{random_tensor({3, h, w}, rng, 0, 1), "clip", index};
}

/// Small network for exact numeric checks: two encoder stages, N = 8.
inline wasrt::NetworkConfig toy_config(int T, wasrt::Aggregation agg = wasrt::Aggregation::conv3d, int kernel = 3) {
    wasrt::NetworkConfig c;
    c.context_length = T;
    c.deep_channels = 8;
    c.encoder = {{4, 2}, {8, 2}};
    c.aggregation = agg;
    c.spatial_kernel = kernel;
    return c;
}

inline wasrt::TemporalSample random_sample(int T, int h, int w, std::mt19937_64& rng) {
    wasrt::TemporalSample s;
    for (int i = 0; i < T; ++i) s.context.push_back(random_frame(h, w, rng, i));
    s.target = random_frame(h, w, rng, T);
    return s;
}

/// Directory under the system temp dir, emptied on construction.
inline wasrt::fs::path scratch_dir(const std::string& name) {
    const auto p = wasrt::fs::temp_directory_path() / ("wasrt_test_" + name);
    wasrt::fs::remove_all(p);
    wasrt::fs::create_directories(p);
    return p;
}

}  // namespace testing
