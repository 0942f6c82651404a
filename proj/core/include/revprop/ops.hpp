#pragma once

#include <concepts>
#include <cstddef>

#include "revprop/tensor.hpp"

namespace revprop {

/// Cubic 3D convolution kernel, stride 1.
///
/// weights: (C_out, C_in, k, k, k); bias: (C_out). With padding (k-1)/2 the
/// spatial extents are preserved; with 0 each shrinks by k-1.
template <std::floating_point T>
struct ConvKernel {
  Tensor<T> weights;
  Tensor<T> bias;
  std::size_t padding = 0;

  ConvKernel() = default;
  ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t k, std::size_t pad,
             MemoryKind kind = MemoryKind::parameter);

  [[nodiscard]] std::size_t out_channels() const { return weights.shape()[0]; }
  [[nodiscard]] std::size_t in_channels() const { return weights.shape()[1]; }
  [[nodiscard]] std::size_t size() const { return weights.shape()[2]; }
  [[nodiscard]] std::size_t numel() const { return weights.size() + bias.size(); }
};

/// Same-shaped zeroed kernel, used as a gradient accumulator.
template <std::floating_point T>
ConvKernel<T> zeros_like(const ConvKernel<T>& k, MemoryKind kind = MemoryKind::parameter);

template <std::floating_point T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

/// Output shape of conv3d_forward for an input of the given shape.
/// Throws ShapeError on channel mismatch or non-positive output extent.
template <std::floating_point T>
Shape conv3d_output_shape(const Shape& input, const ConvKernel<T>& kernel);

/// Cross-correlation with zero padding (no kernel flip).
template <std::floating_point T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const ConvKernel<T>& kernel);

/// Exact gradients of conv3d_forward with respect to input, weights and bias.
template <std::floating_point T>
ConvGrads<T> conv3d_backward(const Tensor<T>& x, const ConvKernel<T>& kernel,
                             const Tensor<T>& grad_out);

template <std::floating_point T>
Tensor<T> relu_forward(const Tensor<T>& x);

/// grad_out masked where x <= 0 (subgradient 0 at 0).
template <std::floating_point T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

/// Channel-to-space rearrangement (r^3 C, X, Y, Z) -> (C, rX, rY, rZ):
///   out[c, x, y, z] = in[c r^3 + (x%r) r^2 + (y%r) r + z%r, x/r, y/r, z/r]
template <std::floating_point T>
Tensor<T> shuffle(const Tensor<T>& x, std::size_t r);

/// Exact inverse of shuffle. Also the backward pass of shuffle (and vice versa).
template <std::floating_point T>
Tensor<T> inverse_shuffle(const Tensor<T>& y, std::size_t r);

}  // namespace revprop
