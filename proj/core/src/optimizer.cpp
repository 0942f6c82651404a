#include "revprop/optimizer.hpp"

#include <cmath>

#include "revprop/error.hpp"

namespace revprop {

template <std::floating_point T>
OptimizerState<T> make_optimizer(const NetworkParams<T>& params, AdamHyper hyper) {
  OptimizerState<T> s;
  s.first_moment = zeros_like(params);
  s.second_moment = zeros_like(params);
  s.hyper = hyper;
  return s;
}

template <std::floating_point T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::int64_t step, const AdamHyper& hyper) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ShapeError("adam_update buffers differ in length");
  }
  const double b1 = hyper.beta1;
  const double b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double update = hyper.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + hyper.epsilon);
    param[i] = static_cast<T>(static_cast<double>(param[i]) - update);
  }
}

template <std::floating_point T>
void adam_step(OptimizerState<T>& state, NetworkParams<T>& params, const GradientSet<T>& grads) {
  auto p = kernel_registry(params);
  auto g = kernel_registry(grads.params);
  auto m = kernel_registry(state.first_moment);
  auto v = kernel_registry(state.second_moment);
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw ConfigError("optimizer registry mismatch: " + std::to_string(p.size()) + " parameters, " +
                      std::to_string(g.size()) + " gradients");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool aligned = g[i].first == p[i].first && m[i].first == p[i].first &&
                         v[i].first == p[i].first &&
                         g[i].second->weights.shape() == p[i].second->weights.shape() &&
                         m[i].second->weights.shape() == p[i].second->weights.shape() &&
                         v[i].second->weights.shape() == p[i].second->weights.shape();
    if (!aligned) throw ConfigError("optimizer registry mismatch at " + p[i].first);
  }
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i) {
    adam_update<T>(p[i].second->weights.data(), g[i].second->weights.data(), m[i].second->weights.data(),
                   v[i].second->weights.data(), state.step, state.hyper);
    adam_update<T>(p[i].second->bias.data(), g[i].second->bias.data(), m[i].second->bias.data(),
                   v[i].second->bias.data(), state.step, state.hyper);
  }
}

#define REVPROP_INSTANTIATE(T)                                                                   \
  template OptimizerState<T> make_optimizer(const NetworkParams<T>&, AdamHyper);                 \
  template void adam_update(std::span<T>, std::span<const T>, std::span<T>, std::span<T>,        \
                            std::int64_t, const AdamHyper&);                                     \
  template void adam_step(OptimizerState<T>&, NetworkParams<T>&, const GradientSet<T>&);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
