#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "wasrt/network.hpp"

namespace testing {

// L = sum(R * scores): d L / d scores = R.
inline wasrt::Real probe_loss(const wasrt::Network& net, const wasrt::TemporalSample& s, const wasrt::Tensor& R) {
    const wasrt::Tensor scores = net.forward(s);
    wasrt::Real l = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) l += R[i] * scores[i];
    return l;
}

struct GradCheck {
    double worst_relative = 0;
    int checked = 0;
    int tiny_mismatches = 0;  // entries where both values are ~0 but still disagree
};

/// Central differences on up to `samples` entries of one parameter tensor.
/// Relative error is |a - n| / max(|a|, |n|); entries with both below 1e-7
/// are compared in absolute terms instead.
inline GradCheck check_parameter(wasrt::Network& net, const wasrt::TemporalSample& s, const wasrt::Tensor& R,
                                 const wasrt::Gradients& analytic, const std::string& name, int samples,
                                 std::mt19937_64& rng) {
    GradCheck r;
    wasrt::Tensor& p = net.params().at(name);
    const wasrt::Tensor& g = analytic.at(name);
    const double h = 1e-5;
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    for (int n = 0; n < samples; ++n) {
        const std::size_t i = p.size() <= static_cast<std::size_t>(samples) ? static_cast<std::size_t>(n) % p.size()
                                                                            : pick(rng);
        const wasrt::Real saved = p[i];
        p[i] = saved + h;
        const wasrt::Real up = probe_loss(net, s, R);
        p[i] = saved - h;
        const wasrt::Real down = probe_loss(net, s, R);
        p[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max(std::abs(numeric), std::abs(g[i]));
        if (scale < 1e-7) {
            r.tiny_mismatches += std::abs(numeric - g[i]) >= 1e-8;
            continue;
        }
        r.worst_relative = std::max(r.worst_relative, std::abs(numeric - g[i]) / scale);
        ++r.checked;
    }
    return r;
}

}  // namespace testing
