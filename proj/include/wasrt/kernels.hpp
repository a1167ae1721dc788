#pragma once

#include "wasrt/tensor.hpp"

namespace wasrt::kernels {

// Forward/backward primitives used by the network. Two implementations share
// each signature: the OpenMP versions in `kernels` are used at runtime; the
// serial versions in `kernels::reference` are written as direct transcriptions
// of the defining sums and exist to check the fast path.
//
// Shapes:
//   conv2d           in [C][H][W], weight [O][C][k][k], bias [O] -> [O][Ho][Wo]
//   conv3d_temporal  vol [D][C][H][W], weight [O][C][D][k][k], bias [O] -> [O][H][W]
//                    (temporal extent equals D, no temporal padding, spatial pad (k-1)/2)
//   temporal_avgpool vol [D][C][H][W] -> [C][H][W], window D x s x s, zero-padded,
//                    divisor always D*s*s

struct ConvGrads {
    Tensor input;   // empty when not requested
    Tensor weight;
    Tensor bias;
};

int conv_output_size(int in, int k, int stride, int pad);

Tensor conv2d(const Tensor& in, const Tensor& weight, const Tensor& bias, int stride, int pad);
ConvGrads conv2d_backward(const Tensor& in, const Tensor& weight, const Tensor& grad_out, int stride,
                          int pad, bool input_grad = true);

Tensor conv3d_temporal(const Tensor& vol, const Tensor& weight, const Tensor& bias);
ConvGrads conv3d_temporal_backward(const Tensor& vol, const Tensor& weight, const Tensor& grad_out);

Tensor temporal_avgpool(const Tensor& vol, int spatial);
Tensor temporal_avgpool_backward(const Tensor& grad_out, int depth, int spatial);

Tensor upsample_nearest(const Tensor& in, int factor);
Tensor upsample_nearest_backward(const Tensor& grad_out, int factor);

void relu_inplace(Tensor& t) noexcept;
/// Masks grad by (activated > 0) in place.
void relu_backward_inplace(Tensor& grad, const Tensor& activated) noexcept;

/// Concatenate two [C][H][W] tensors along channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Split [Ca+Cb][H][W] into its first `first_channels` and the rest.
std::pair<Tensor, Tensor> split_channels(const Tensor& t, int first_channels);

namespace reference {

Tensor conv2d(const Tensor& in, const Tensor& weight, const Tensor& bias, int stride, int pad);
ConvGrads conv2d_backward(const Tensor& in, const Tensor& weight, const Tensor& grad_out, int stride,
                          int pad, bool input_grad = true);

Tensor conv3d_temporal(const Tensor& vol, const Tensor& weight, const Tensor& bias);
ConvGrads conv3d_temporal_backward(const Tensor& vol, const Tensor& weight, const Tensor& grad_out);

Tensor temporal_avgpool(const Tensor& vol, int spatial);
Tensor temporal_avgpool_backward(const Tensor& grad_out, int depth, int spatial);

Tensor upsample_nearest(const Tensor& in, int factor);
Tensor upsample_nearest_backward(const Tensor& grad_out, int factor);

}  // namespace reference

}  // namespace wasrt::kernels
