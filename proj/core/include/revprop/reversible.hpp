#pragma once

#include <concepts>
#include <cstddef>
#include <type_traits>

#include "revprop/graph.hpp"
#include "revprop/ops.hpp"
#include "revprop/tensor.hpp"

namespace revprop {

/// Shape-preserving residual bottleneck on c channels:
/// 1^3 reduce (c -> max(c/2, 1)) -> ReLU -> 3^3 same-padded core -> ReLU -> 1^3 expand (-> c).
template <std::floating_point T>
struct Bottleneck {
  ConvKernel<T> reduce;
  ConvKernel<T> core;
  ConvKernel<T> expand;

  Bottleneck() = default;
  explicit Bottleneck(std::size_t channels, MemoryKind kind = MemoryKind::parameter);

  [[nodiscard]] std::size_t channels() const { return reduce.in_channels(); }
  [[nodiscard]] static std::size_t mid_channels(std::size_t channels) {
    return channels / 2 > 0 ? channels / 2 : 1;
  }
};

template <std::floating_point T>
Bottleneck<T> zeros_like(const Bottleneck<T>& b, MemoryKind kind = MemoryKind::parameter);

template <std::floating_point T>
Tensor<T> bottleneck_forward(const Bottleneck<T>& fn, const Tensor<T>& x);

/// Records the bottleneck into a graph; returns the output node.
template <std::floating_point T>
typename Graph<T>::Node record_bottleneck(Graph<T>& g, typename Graph<T>::Node x,
                                          const Bottleneck<T>& fn);

/// Additive-coupling reversible block of even width 2c:
///   z = x_a + F1(x_b),  y_b = x_b + F2(z),  y_a = z.
template <std::floating_point T>
struct RevNetBlock {
  Bottleneck<T> f1;
  Bottleneck<T> f2;

  RevNetBlock() = default;
  /// Throws ConfigError when `width` is odd.
  explicit RevNetBlock(std::size_t width, MemoryKind kind = MemoryKind::parameter);

  [[nodiscard]] std::size_t width() const { return 2 * f1.channels(); }
};

template <std::floating_point T>
RevNetBlock<T> zeros_like(const RevNetBlock<T>& b, MemoryKind kind = MemoryKind::parameter);

template <std::floating_point T>
Tensor<T> revnet_forward(const RevNetBlock<T>& block, const Tensor<T>& x);

/// z = y_a;  x_b = y_b - F2(z);  x_a = z - F1(x_b).
template <std::floating_point T>
Tensor<T> revnet_invert(const RevNetBlock<T>& block, const Tensor<T>& y);

template <std::floating_point T>
struct RevNetBackward {
  Tensor<T> x;       ///< reconstructed block input
  Tensor<T> grad_x;  ///< dL/dx
};

/// Backward pass from the block output alone.
///
/// Reconstructs the input by inversion while replaying F2 and then F1 on
/// short-lived local graphs; parameter gradients are added into
/// `grad_params` (may be null). No forward intermediates are required.
template <std::floating_point T>
RevNetBackward<T> revnet_backward(const RevNetBlock<T>& block, Tensor<T> y, Tensor<T> grad_y,
                                  std::type_identity_t<RevNetBlock<T>>* grad_params);

/// Records the block into a full graph (naive mode); returns the output node.
template <std::floating_point T>
typename Graph<T>::Node record_revnet(Graph<T>& g, typename Graph<T>::Node x,
                                      const RevNetBlock<T>& block);

}  // namespace revprop
