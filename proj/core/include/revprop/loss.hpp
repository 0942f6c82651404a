#pragma once

#include <concepts>
#include <span>
#include <vector>

#include "revprop/tensor.hpp"

namespace revprop {

template <std::floating_point T>
struct LossResult {
  double loss = 0.0;
  std::vector<Tensor<T>> grads;  ///< d loss / d pred, one per prediction
};

/// sqrt(mean((pred - target)^2)) over every element of every pair, with
/// gradient (pred - target) / (n loss). A zero loss has a zero gradient.
/// Accumulation is in double in a fixed order.
template <std::floating_point T>
LossResult<T> rmse_loss(std::span<const Tensor<T>> preds, std::span<const Tensor<T>> targets);

/// Single-pair convenience overload.
template <std::floating_point T>
LossResult<T> rmse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Loss value only.
template <std::floating_point T>
double rmse(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace revprop
