#pragma once

#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "revprop/engine.hpp"
#include "revprop/network.hpp"
#include "revprop/optimizer.hpp"

namespace revprop {

/// One training example: network input and its pre-shuffle target.
template <std::floating_point T>
struct Sample {
  Tensor<T> input;
  Tensor<T> target;
};

struct ProtocolConfig {
  double learning_rate = 1e-4;
  double lr_decay = 0.5;        ///< multiplier applied on a validation plateau
  std::size_t lr_plateau = 5;   ///< epochs without improvement per decay
  double lr_floor = 1e-6;
  std::size_t patience = 10;    ///< epochs without improvement before stopping
  std::size_t max_epochs = 100;
  std::size_t batch_size = 12;
  BackpropMode backprop = BackpropMode::efficient;
  std::size_t threads = 0;      ///< 0: worker_threads()

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_rmse = 0.0;
  double learning_rate = 0.0;
  double wall_time_ms = 0.0;
};

struct TrainRunRecord {
  std::uint64_t seed = 0;
  std::string backprop;
  std::vector<EpochRecord> epochs;
  std::string stop_reason;  ///< "max_epochs", "patience" or "diverged"
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
  std::string diagnostic;

  [[nodiscard]] bool diverged() const { return stop_reason == "diverged"; }
};

template <std::floating_point T>
struct TrainResult {
  TrainRunRecord record;
  NetworkParams<T> best_params;  ///< parameters after the best validation epoch
};

/// RMSE over every element of every validation target, inference mode.
template <std::floating_point T>
double validation_rmse(const NetworkParams<T>& params, const NetworkSpec& spec,
                       const std::vector<Sample<T>>& validation, std::size_t threads = 0);

/// Minibatch Adam on the batch RMSE. Parameters come from build(spec, seed);
/// the epoch order is shuffled from the same seed. Throws ConfigError on an
/// empty training or validation set. Divergence ends the run with
/// stop_reason "diverged" rather than throwing.
template <std::floating_point T>
TrainResult<T> train(const NetworkSpec& spec, const std::vector<Sample<T>>& training,
                     const std::vector<Sample<T>>& validation, const ProtocolConfig& config,
                     std::uint64_t seed);

template <std::floating_point T>
struct MultiSeedResult {
  std::vector<TrainRunRecord> records;
  std::size_t selected = 0;  ///< index into records
  NetworkParams<T> best_params;
};

inline constexpr std::size_t kDefaultSeedCount = 4;

/// Trains seeds base, base+1, ... and keeps the run with the lowest best
/// validation RMSE (first on ties). Diverged runs are never selected unless
/// all diverge.
template <std::floating_point T>
MultiSeedResult<T> train_multi_seed(const NetworkSpec& spec, const std::vector<Sample<T>>& training,
                                    const std::vector<Sample<T>>& validation,
                                    const ProtocolConfig& config, std::uint64_t base_seed,
                                    std::size_t seeds = kDefaultSeedCount);

/// One JSON object per epoch without wall time, so reruns compare byte-for-byte.
std::string epochs_jsonl(const TrainRunRecord& record);
/// {"epoch":..,"wall_time_ms":..} per line.
std::string timings_jsonl(const TrainRunRecord& record);
/// Seed, backprop mode, stop reason, best epoch and best validation RMSE.
std::string summary_json(const TrainRunRecord& record);

}  // namespace revprop
