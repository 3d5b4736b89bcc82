#pragma once

#include "dipreg/tensor.hpp"

namespace dipreg {

/// 2-d cross-correlation of a {Cin,H,W} input with a {Cout,Cin,k,k} kernel
/// and {Cout} bias. Zero-fill padding, odd k. Output is
/// {Cout, (H+2p-k)/s+1, (W+2p-k)/s+1}. Differentiable in input, weight
/// and bias.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

/// Output spatial extent of conv2d along one axis.
Index conv2d_out_extent(Index in, Index kernel, int stride, int padding);

/// Doubles both spatial extents of a {C,H,W} tensor by bilinear
/// interpolation, align-corners-false: output pixel i samples the input at
/// (i + 0.5)/2 - 0.5, clamped to the valid range.
Tensor upsample_bilinear2x(const Tensor& input);

/// Elementwise max(x, slope*x) with slope in [0,1). The subgradient at 0
/// is defined as slope.
Tensor leaky_relu(const Tensor& input, double slope);

/// Per-channel normalization of a {C,H,W} tensor over its spatial extent:
/// (x - mean) / sqrt(var + eps), population variance.
Tensor instance_norm(const Tensor& input, double eps = 1e-5);

/// Stacks two {C,H,W} tensors along channels, a first.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Channels [first, first+count) of a {C,H,W} tensor.
Tensor slice_channels(const Tensor& input, Index first, Index count);

}  // namespace dipreg
