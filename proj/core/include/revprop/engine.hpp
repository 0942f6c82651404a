#pragma once

#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "revprop/network.hpp"
#include "revprop/tensor.hpp"

namespace revprop {

/// Gradient of every registered parameter plus the network input.
/// Parameter gradients share NetworkParams' structure, so their registry
/// paths match the parameter registry by construction.
template <std::floating_point T>
struct GradientSet {
  NetworkParams<T> params;
  Tensor<T> input;
};

/// Zero gradients shaped like `params`.
template <std::floating_point T>
GradientSet<T> zero_gradients(const NetworkParams<T>& params);

/// Adds `other` into `acc` entry by entry (registry order).
template <std::floating_point T>
void accumulate(GradientSet<T>& acc, const GradientSet<T>& other);

/// Reverse sweep over the full graph recorded by a naive-training forward.
template <std::floating_point T>
GradientSet<T> backward_naive(const NetworkParams<T>& params, const NetworkSpec& spec,
                              NaiveCache<T>&& cache, Tensor<T> grad_output);

/// Memory-efficient schedule: for each ESPCN layer (last to first) load its
/// cached input A^k, replay the layer on a local graph and backpropagate;
/// then walk the preceding stack block by block with revnet_backward,
/// reconstructing activations from outputs. Consumes the checkpoints.
///
/// When `audit` holds forward-pass block inputs, every reconstruction is
/// compared against them.
template <std::floating_point T>
GradientSet<T> backward_efficient(const NetworkParams<T>& params, const NetworkSpec& spec,
                                  TrainingCheckpointSet<T>&& checkpoints, Tensor<T> grad_output,
                                  ReconstructionAudit<T>* audit = nullptr);

enum class BackpropMode : std::uint8_t { naive, efficient };

std::string to_string(BackpropMode m);
BackpropMode parse_backprop_mode(const std::string& s);

inline ForwardMode training_forward_mode(BackpropMode m) {
  return m == BackpropMode::naive ? ForwardMode::naive_training : ForwardMode::efficient_training;
}

/// Runs a forward pass in the mode's training form and the matching backward.
template <std::floating_point T>
GradientSet<T> forward_backward(const NetworkParams<T>& params, const NetworkSpec& spec,
                                const Tensor<T>& x, const Tensor<T>& target, BackpropMode mode,
                                double* loss = nullptr);

struct ProfileResult {
  BackpropMode mode = BackpropMode::efficient;
  std::size_t n_blocks = 0;
  std::int64_t peak_elements = 0;
  std::int64_t fwd_ops = 0;
  std::int64_t bwd_ops = 0;
  std::int64_t parameter_elements = 0;  ///< model parameters (not counted in peak)
  double wall_time_ms = 0.0;
};

/// One forward + RMSE loss + backward under a fresh ledger scope.
template <std::floating_point T>
ProfileResult profile_step(const NetworkParams<T>& params, const NetworkSpec& spec, const Tensor<T>& x,
                           const Tensor<T>& target, BackpropMode mode);

/// {"mode":..,"n_blocks":..,"peak_elements":..,"fwd_ops":..,"bwd_ops":..,"wall_time_ms":..}
std::string to_json_line(const ProfileResult& r);

/// CSV with columns mode,n_blocks,peak_elements,parameter_elements,fwd_ops,bwd_ops,
/// naive_over_efficient_peak,wall_time_ms. The ratio column is filled for rows
/// whose N has both modes present. Wall time is the last column.
std::string profile_csv(const std::vector<ProfileResult>& rows);

}  // namespace revprop
