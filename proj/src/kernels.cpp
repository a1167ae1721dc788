#include "wasrt/kernels.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/Core>

namespace wasrt::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr long kParallelThreshold = 1L << 15;

int ceil_div_nonneg(int a, int b) { return a <= 0 ? 0 : (a + b - 1) / b; }

// Output positions o in [lo, hi) whose tap o*stride + offset lands in [0, extent).
struct TapRange {
    int lo;
    int hi;
};

TapRange valid_outputs(int out_extent, int in_extent, int stride, int offset) {
    const int lo = ceil_div_nonneg(-offset, stride);
    const int last = in_extent - 1 - offset;
    const int hi = last < 0 ? 0 : std::min(out_extent, last / stride + 1);
    return {lo, std::max(lo, hi)};
}

void require_rank(const Tensor& t, int rank, const char* what) {
    if (t.rank() != rank)
        throw std::invalid_argument(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                                    shape_string(t.shape()));
}

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

struct PatchGeometry {
    int planes, H, W, k, stride, pad;
    int out_h() const { return conv_output_size(H, k, stride, pad); }
    int out_w() const { return conv_output_size(W, k, stride, pad); }
    int rows() const { return planes * k * k; }
    int positions() const { return out_h() * out_w(); }
};

template <typename P>
std::vector<P*> plane_pointers(P* base, int planes, int plane_size) {
    std::vector<P*> out(static_cast<std::size_t>(planes));
    for (int i = 0; i < planes; ++i) out[static_cast<std::size_t>(i)] = base + static_cast<std::size_t>(i) * plane_size;
    return out;
}

// Planes of a [D][C][H][W] volume in (c, d) order.
template <typename P>
std::vector<P*> volume_planes(P* base, int D, int C, int plane_size) {
    std::vector<P*> out;
    out.reserve(static_cast<std::size_t>(C) * D);
    for (int c = 0; c < C; ++c)
        for (int d = 0; d < D; ++d) out.push_back(base + (static_cast<std::size_t>(d) * C + c) * plane_size);
    return out;
}

// cols[(p*k + ky)*k + kx][oy*Wo + ox] = plane p at (oy*stride + ky - pad, ox*stride + kx - pad), 0 outside.
std::vector<Real> im2col(const std::vector<const Real*>& planes, const PatchGeometry& g) {
    const int Ho = g.out_h(), Wo = g.out_w(), P = g.positions();
    std::vector<Real> cols(static_cast<std::size_t>(g.rows()) * P, 0);
#pragma omp parallel for schedule(static) if (static_cast<long>(cols.size()) > kParallelThreshold)
    for (int p = 0; p < g.planes; ++p) {
        const Real* src = planes[static_cast<std::size_t>(p)];
        for (int ky = 0; ky < g.k; ++ky) {
            const TapRange rows = valid_outputs(Ho, g.H, g.stride, ky - g.pad);
            for (int kx = 0; kx < g.k; ++kx) {
                const TapRange xs = valid_outputs(Wo, g.W, g.stride, kx - g.pad);
                Real* dst = cols.data() + (static_cast<std::size_t>(p * g.k + ky) * g.k + kx) * P;
                for (int oy = rows.lo; oy < rows.hi; ++oy) {
                    const Real* row = src + static_cast<std::size_t>(oy * g.stride + ky - g.pad) * g.W + (kx - g.pad);
                    Real* out_row = dst + static_cast<std::size_t>(oy) * Wo;
                    if (g.stride == 1)
                        std::copy(row + xs.lo, row + xs.hi, out_row + xs.lo);
                    else
                        for (int ox = xs.lo; ox < xs.hi; ++ox) out_row[ox] = row[ox * g.stride];
                }
            }
        }
    }
    return cols;
}

// Adjoint of im2col: scatter-add columns back onto the planes.
void col2im_add(const std::vector<Real>& cols, const PatchGeometry& g, const std::vector<Real*>& planes) {
    const int Ho = g.out_h(), Wo = g.out_w(), P = g.positions();
#pragma omp parallel for schedule(static) if (static_cast<long>(cols.size()) > kParallelThreshold)
    for (int p = 0; p < g.planes; ++p) {
        Real* dst_plane = planes[static_cast<std::size_t>(p)];
        for (int ky = 0; ky < g.k; ++ky) {
            const TapRange rows = valid_outputs(Ho, g.H, g.stride, ky - g.pad);
            for (int kx = 0; kx < g.k; ++kx) {
                const TapRange xs = valid_outputs(Wo, g.W, g.stride, kx - g.pad);
                const Real* src = cols.data() + (static_cast<std::size_t>(p * g.k + ky) * g.k + kx) * P;
                for (int oy = rows.lo; oy < rows.hi; ++oy) {
                    Real* row = dst_plane + static_cast<std::size_t>(oy * g.stride + ky - g.pad) * g.W + (kx - g.pad);
                    const Real* in_row = src + static_cast<std::size_t>(oy) * Wo;
                    for (int ox = xs.lo; ox < xs.hi; ++ox) row[ox * g.stride] += in_row[ox];
                }
            }
        }
    }
}

// out[O][P] = weight[O][R] * cols[R][P] + bias
void matmul_bias(const Real* weight, int O, int R, const Real* cols, int P, const Tensor& bias, Real* out) {
    MutMap o(out, O, P);
    o.noalias() = ConstMap(weight, O, R) * ConstMap(cols, R, P);
    if (!bias.empty())
        for (int i = 0; i < O; ++i) o.row(i).array() += bias[static_cast<std::size_t>(i)];
}

void weight_and_bias_grads(const Real* grad_out, int O, const PatchGeometry& g, const Real* cols, Real* gw,
                           Real* gb) {
    const ConstMap go(grad_out, O, g.positions());
    MutMap(gw, O, g.rows()).noalias() = go * ConstMap(cols, g.rows(), g.positions()).transpose();
    Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>(gb, O) = go.rowwise().sum();
}

// weight^T * grad_out: gradient with respect to the im2col matrix.
std::vector<Real> transposed_product(const Real* weight, int O, const PatchGeometry& g, const Real* grad_out) {
    std::vector<Real> out(static_cast<std::size_t>(g.rows()) * g.positions());
    MutMap(out.data(), g.rows(), g.positions()).noalias() =
        ConstMap(weight, O, g.rows()).transpose() * ConstMap(grad_out, O, g.positions());
    return out;
}

}  // namespace

int conv_output_size(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

Tensor conv2d(const Tensor& in, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    require_rank(in, 3, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int O = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != C || weight.dim(3) != k)
        throw std::invalid_argument("conv2d weight " + shape_string(weight.shape()) + " incompatible with input " +
                                    shape_string(in.shape()));
    const PatchGeometry geo{C, H, W, k, stride, pad};
    const std::vector<Real> cols = im2col(plane_pointers(in.data(), C, H * W), geo);
    Tensor out({O, geo.out_h(), geo.out_w()});
    matmul_bias(weight.data(), O, geo.rows(), cols.data(), geo.positions(), bias, out.data());
    return out;
}

ConvGrads conv2d_backward(const Tensor& in, const Tensor& weight, const Tensor& grad_out, int stride, int pad,
                          bool input_grad) {
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int O = weight.dim(0), k = weight.dim(2);
    const PatchGeometry geo{C, H, W, k, stride, pad};
    const std::vector<Real> cols = im2col(plane_pointers(in.data(), C, H * W), geo);
    ConvGrads g;
    g.weight = Tensor(weight.shape());
    g.bias = Tensor({O});
    weight_and_bias_grads(grad_out.data(), O, geo, cols.data(), g.weight.data(), g.bias.data());
    if (!input_grad) return g;
    g.input = Tensor(in.shape());
    const std::vector<Real> grad_cols = transposed_product(weight.data(), O, geo, grad_out.data());
    col2im_add(grad_cols, geo, plane_pointers(g.input.data(), C, H * W));
    return g;
}

// The volume is read as C*D input planes ordered (c, d) so that the weight
// [O][C][D][k][k] is already the GEMM left operand.
Tensor conv3d_temporal(const Tensor& vol, const Tensor& weight, const Tensor& bias) {
    require_rank(vol, 4, "conv3d volume");
    require_rank(weight, 5, "conv3d weight");
    const int D = vol.dim(0), C = vol.dim(1), H = vol.dim(2), W = vol.dim(3);
    const int O = weight.dim(0), k = weight.dim(3), pad = (k - 1) / 2;
    if (weight.dim(1) != C || weight.dim(2) != D || weight.dim(4) != k)
        throw std::invalid_argument("conv3d weight " + shape_string(weight.shape()) + " incompatible with volume " +
                                    shape_string(vol.shape()));
    const PatchGeometry geo{C * D, H, W, k, 1, pad};
    const std::vector<Real> cols = im2col(volume_planes(vol.data(), D, C, H * W), geo);
    Tensor out({O, H, W});
    matmul_bias(weight.data(), O, geo.rows(), cols.data(), geo.positions(), bias, out.data());
    return out;
}

ConvGrads conv3d_temporal_backward(const Tensor& vol, const Tensor& weight, const Tensor& grad_out) {
    const int D = vol.dim(0), C = vol.dim(1), H = vol.dim(2), W = vol.dim(3);
    const int O = weight.dim(0), k = weight.dim(3), pad = (k - 1) / 2;
    const PatchGeometry geo{C * D, H, W, k, 1, pad};
    const std::vector<Real> cols = im2col(volume_planes(vol.data(), D, C, H * W), geo);
    ConvGrads g;
    g.weight = Tensor(weight.shape());
    g.bias = Tensor({O});
    weight_and_bias_grads(grad_out.data(), O, geo, cols.data(), g.weight.data(), g.bias.data());
    g.input = Tensor(vol.shape());
    const std::vector<Real> grad_cols = transposed_product(weight.data(), O, geo, grad_out.data());
    col2im_add(grad_cols, geo, volume_planes(g.input.data(), D, C, H * W));
    return g;
}

Tensor temporal_avgpool(const Tensor& vol, int spatial) {
    require_rank(vol, 4, "temporal_avgpool volume");
    const int D = vol.dim(0), C = vol.dim(1), H = vol.dim(2), W = vol.dim(3), r = spatial / 2;
    const Real scale = Real{1} / (static_cast<Real>(D) * spatial * spatial);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({C, H, W});

#pragma omp parallel for schedule(static) if (static_cast<long>(D) * C * plane * spatial * spatial > kParallelThreshold)
    for (int c = 0; c < C; ++c) {
        Real* dst = out.slice(c).data();
        for (int d = 0; d < D; ++d) {
            const Real* src = vol.data() + (static_cast<std::size_t>(d) * C + c) * plane;
            for (int dy = -r; dy <= r; ++dy) {
                const TapRange rows = valid_outputs(H, H, 1, dy);
                for (int dx = -r; dx <= r; ++dx) {
                    const TapRange cols = valid_outputs(W, W, 1, dx);
                    for (int y = rows.lo; y < rows.hi; ++y) {
                        const Real* row = src + static_cast<std::size_t>(y + dy) * W + dx;
                        Real* out_row = dst + static_cast<std::size_t>(y) * W;
                        for (int x = cols.lo; x < cols.hi; ++x) out_row[x] += row[x];
                    }
                }
            }
        }
        for (std::size_t i = 0; i < plane; ++i) dst[i] *= scale;
    }
    return out;
}

Tensor temporal_avgpool_backward(const Tensor& grad_out, int depth, int spatial) {
    const int C = grad_out.dim(0), H = grad_out.dim(1), W = grad_out.dim(2), r = spatial / 2;
    const Real scale = Real{1} / (static_cast<Real>(depth) * spatial * spatial);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor g({depth, C, H, W});

#pragma omp parallel for schedule(static) if (static_cast<long>(C) * plane * spatial * spatial > kParallelThreshold)
    for (int c = 0; c < C; ++c) {
        std::vector<Real> acc(plane, 0);
        const Real* go = grad_out.slice(c).data();
        // Adjoint of the window sum: scatter each output gradient back over its taps.
        for (int dy = -r; dy <= r; ++dy) {
            const TapRange rows = valid_outputs(H, H, 1, dy);
            for (int dx = -r; dx <= r; ++dx) {
                const TapRange cols = valid_outputs(W, W, 1, dx);
                for (int y = rows.lo; y < rows.hi; ++y) {
                    Real* row = acc.data() + static_cast<std::size_t>(y + dy) * W + dx;
                    const Real* grow = go + static_cast<std::size_t>(y) * W;
                    for (int x = cols.lo; x < cols.hi; ++x) row[x] += grow[x];
                }
            }
        }
        for (int d = 0; d < depth; ++d) {
            Real* dst = g.data() + (static_cast<std::size_t>(d) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = acc[i] * scale;
        }
    }
    return g;
}

Tensor upsample_nearest(const Tensor& in, int factor) {
    const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
    Tensor out({C, H * factor, W * factor});
    const int Wo = W * factor;
#pragma omp parallel for schedule(static) if (static_cast<long>(out.size()) > kParallelThreshold)
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H * factor; ++y) {
            const Real* src = in.data() + (static_cast<std::size_t>(c) * H + y / factor) * W;
            Real* dst = out.data() + (static_cast<std::size_t>(c) * H * factor + y) * Wo;
            for (int x = 0; x < Wo; ++x) dst[x] = src[x / factor];
        }
    }
    return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out, int factor) {
    const int C = grad_out.dim(0), H = grad_out.dim(1) / factor, W = grad_out.dim(2) / factor;
    const int Wo = W * factor;
    Tensor g({C, H, W});
#pragma omp parallel for schedule(static) if (static_cast<long>(grad_out.size()) > kParallelThreshold)
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H * factor; ++y) {
            const Real* src = grad_out.data() + (static_cast<std::size_t>(c) * H * factor + y) * Wo;
            Real* dst = g.data() + (static_cast<std::size_t>(c) * H + y / factor) * W;
            for (int x = 0; x < Wo; ++x) dst[x / factor] += src[x];
        }
    }
    return g;
}

void relu_inplace(Tensor& t) noexcept {
    for (Real& v : t.values()) v = v > 0 ? v : Real{0};
}

void relu_backward_inplace(Tensor& grad, const Tensor& activated) noexcept {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(activated[i] > 0)) grad[i] = 0;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels spatial mismatch: " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.values().begin(), a.values().end(), out.data());
    std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& t, int first_channels) {
    Tensor a({first_channels, t.dim(1), t.dim(2)});
    Tensor b({t.dim(0) - first_channels, t.dim(1), t.dim(2)});
    std::copy(t.values().begin(), t.values().begin() + static_cast<std::ptrdiff_t>(a.size()), a.data());
    std::copy(t.values().begin() + static_cast<std::ptrdiff_t>(a.size()), t.values().end(), b.data());
    return {std::move(a), std::move(b)};
}

}  // namespace wasrt::kernels
