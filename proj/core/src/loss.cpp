#include "revprop/loss.hpp"

#include <cmath>

#include "revprop/error.hpp"

namespace revprop {

template <std::floating_point T>
LossResult<T> rmse_loss(std::span<const Tensor<T>> preds, std::span<const Tensor<T>> targets) {
  if (preds.size() != targets.size()) {
    throw ShapeError("rmse_loss needs one target per prediction");
  }
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].shape() != targets[i].shape()) {
      throw ShapeError("rmse_loss shape mismatch: " + preds[i].shape().to_string() + " vs " +
                       targets[i].shape().to_string());
    }
    auto p = preds[i].data();
    auto t = targets[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = static_cast<double>(p[j]) - static_cast<double>(t[j]);
      sum_sq += d * d;
    }
    n += p.size();
  }
  if (n == 0) throw ShapeError("rmse_loss of empty tensors");

  LossResult<T> out;
  out.loss = std::sqrt(sum_sq / static_cast<double>(n));
  const double denom = static_cast<double>(n) * out.loss;
  out.grads.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    Tensor<T> g(preds[i].shape());
    if (out.loss > 0.0) {
      auto p = preds[i].data();
      auto t = targets[i].data();
      auto gd = g.data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        gd[j] = static_cast<T>((static_cast<double>(p[j]) - static_cast<double>(t[j])) / denom);
      }
    }
    out.grads.push_back(std::move(g));
  }
  return out;
}

template <std::floating_point T>
LossResult<T> rmse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  return rmse_loss<T>(std::span<const Tensor<T>>(&pred, 1), std::span<const Tensor<T>>(&target, 1));
}

template <std::floating_point T>
double rmse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("rmse shape mismatch: " + pred.shape().to_string() + " vs " +
                     target.shape().to_string());
  }
  if (pred.empty()) throw ShapeError("rmse of empty tensors");
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = static_cast<double>(pred[j]) - static_cast<double>(target[j]);
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq / static_cast<double>(pred.size()));
}

template LossResult<float> rmse_loss(std::span<const Tensor<float>>, std::span<const Tensor<float>>);
template LossResult<double> rmse_loss(std::span<const Tensor<double>>, std::span<const Tensor<double>>);
template LossResult<float> rmse_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> rmse_loss(const Tensor<double>&, const Tensor<double>&);
template double rmse(const Tensor<float>&, const Tensor<float>&);
template double rmse(const Tensor<double>&, const Tensor<double>&);

}  // namespace revprop
