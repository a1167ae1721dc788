// Serial reference kernels. Every output element is computed straight from its
// defining sum with explicit bounds checks; no loop reordering, no OpenMP.

#include "wasrt/kernels.hpp"

namespace wasrt::kernels::reference {

namespace {

bool inside(int v, int extent) { return v >= 0 && v < extent; }

std::size_t idx4(const Tensor& t, int a, int b, int c, int d) {
    return ((static_cast<std::size_t>(a) * t.dim(1) + b) * t.dim(2) + c) * t.dim(3) + d;
}

std::size_t idx5(const Tensor& t, int a, int b, int c, int d, int e) {
    return (((static_cast<std::size_t>(a) * t.dim(1) + b) * t.dim(2) + c) * t.dim(3) + d) * t.dim(4) + e;
}

}  // namespace

Tensor conv2d(const Tensor& in, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int O = weight.dim(0), k = weight.dim(2);
    const int Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
    Tensor out({O, Ho, Wo});
    for (int o = 0; o < O; ++o)
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                Real s = bias.empty() ? 0 : bias[o];
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                            if (inside(iy, H) && inside(ix, W)) s += weight[idx4(weight, o, c, ky, kx)] * in.at(c, iy, ix);
                        }
                out.at(o, oy, ox) = s;
            }
    return out;
}

ConvGrads conv2d_backward(const Tensor& in, const Tensor& weight, const Tensor& grad_out, int stride, int pad,
                          bool input_grad) {
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int O = weight.dim(0), k = weight.dim(2);
    const int Ho = grad_out.dim(1), Wo = grad_out.dim(2);
    ConvGrads g;
    g.weight = Tensor(weight.shape());
    g.bias = Tensor({O});
    if (input_grad) g.input = Tensor(in.shape());
    for (int o = 0; o < O; ++o)
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                const Real go = grad_out.at(o, oy, ox);
                g.bias[o] += go;
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                            if (!inside(iy, H) || !inside(ix, W)) continue;
                            g.weight[idx4(weight, o, c, ky, kx)] += go * in.at(c, iy, ix);
                            if (input_grad) g.input.at(c, iy, ix) += go * weight[idx4(weight, o, c, ky, kx)];
                        }
            }
    return g;
}

Tensor conv3d_temporal(const Tensor& vol, const Tensor& weight, const Tensor& bias) {
    const int D = vol.dim(0), C = vol.dim(1), H = vol.dim(2), W = vol.dim(3);
    const int O = weight.dim(0), k = weight.dim(3), pad = (k - 1) / 2;
    Tensor out({O, H, W});
    for (int o = 0; o < O; ++o)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                Real s = bias.empty() ? 0 : bias[o];
                for (int c = 0; c < C; ++c)
                    for (int d = 0; d < D; ++d)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = y + ky - pad, ix = x + kx - pad;
                                if (inside(iy, H) && inside(ix, W))
                                    s += weight[idx5(weight, o, c, d, ky, kx)] * vol[idx4(vol, d, c, iy, ix)];
                            }
                out.at(o, y, x) = s;
            }
    return out;
}

ConvGrads conv3d_temporal_backward(const Tensor& vol, const Tensor& weight, const Tensor& grad_out) {
    const int D = vol.dim(0), C = vol.dim(1), H = vol.dim(2), W = vol.dim(3);
    const int O = weight.dim(0), k = weight.dim(3), pad = (k - 1) / 2;
    ConvGrads g;
    g.weight = Tensor(weight.shape());
    g.bias = Tensor({O});
    g.input = Tensor(vol.shape());
    for (int o = 0; o < O; ++o)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const Real go = grad_out.at(o, y, x);
                g.bias[o] += go;
                for (int c = 0; c < C; ++c)
                    for (int d = 0; d < D; ++d)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = y + ky - pad, ix = x + kx - pad;
                                if (!inside(iy, H) || !inside(ix, W)) continue;
                                g.weight[idx5(weight, o, c, d, ky, kx)] += go * vol[idx4(vol, d, c, iy, ix)];
                                g.input[idx4(vol, d, c, iy, ix)] += go * weight[idx5(weight, o, c, d, ky, kx)];
                            }
            }
    return g;
}

Tensor temporal_avgpool(const Tensor& vol, int spatial) {
    const int D = vol.dim(0), C = vol.dim(1), H = vol.dim(2), W = vol.dim(3), r = spatial / 2;
    const Real count = static_cast<Real>(D) * spatial * spatial;
    Tensor out({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                Real s = 0;
                for (int d = 0; d < D; ++d)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx)
                            if (inside(y + dy, H) && inside(x + dx, W)) s += vol[idx4(vol, d, c, y + dy, x + dx)];
                out.at(c, y, x) = s / count;
            }
    return out;
}

Tensor temporal_avgpool_backward(const Tensor& grad_out, int depth, int spatial) {
    const int C = grad_out.dim(0), H = grad_out.dim(1), W = grad_out.dim(2), r = spatial / 2;
    const Real count = static_cast<Real>(depth) * spatial * spatial;
    Tensor g({depth, C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int d = 0; d < depth; ++d)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx)
                            if (inside(y + dy, H) && inside(x + dx, W))
                                g[idx4(g, d, c, y + dy, x + dx)] += grad_out.at(c, y, x) / count;
    return g;
}

Tensor upsample_nearest(const Tensor& in, int factor) {
    Tensor out({in.dim(0), in.dim(1) * factor, in.dim(2) * factor});
    for (int c = 0; c < out.dim(0); ++c)
        for (int y = 0; y < out.dim(1); ++y)
            for (int x = 0; x < out.dim(2); ++x) out.at(c, y, x) = in.at(c, y / factor, x / factor);
    return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out, int factor) {
    Tensor g({grad_out.dim(0), grad_out.dim(1) / factor, grad_out.dim(2) / factor});
    for (int c = 0; c < grad_out.dim(0); ++c)
        for (int y = 0; y < grad_out.dim(1); ++y)
            for (int x = 0; x < grad_out.dim(2); ++x) g.at(c, y / factor, x / factor) += grad_out.at(c, y, x);
    return g;
}

}  // namespace wasrt::kernels::reference
