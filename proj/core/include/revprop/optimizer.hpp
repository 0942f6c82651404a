#pragma once

#include <concepts>
#include <cstdint>
#include <span>

#include "revprop/engine.hpp"
#include "revprop/network.hpp"

namespace revprop {

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments mirror the parameter registry one-to-one.
template <std::floating_point T>
struct OptimizerState {
  NetworkParams<T> first_moment;
  NetworkParams<T> second_moment;
  std::int64_t step = 0;
  AdamHyper hyper;
};

template <std::floating_point T>
OptimizerState<T> make_optimizer(const NetworkParams<T>& params, AdamHyper hyper = {});

/// Bias-corrected Adam update of one flat parameter buffer. `step` is the
/// 1-based step index after incrementing.
template <std::floating_point T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::int64_t step, const AdamHyper& hyper);

/// One Adam step over every registry entry. Throws ConfigError when the
/// parameter, gradient and moment registries are not aligned.
template <std::floating_point T>
void adam_step(OptimizerState<T>& state, NetworkParams<T>& params, const GradientSet<T>& grads);

}  // namespace revprop
