#include "revprop/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "revprop/error.hpp"
#include "revprop/loss.hpp"
#include "revprop/parallel.hpp"

namespace revprop {

void ProtocolConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (lr_plateau == 0) throw ConfigError("lr_plateau must be at least 1");
  if (lr_floor < 0.0) throw ConfigError("lr_floor must be non-negative");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
}

namespace {

std::size_t resolve_threads(std::size_t requested) {
  return requested == 0 ? worker_threads() : requested;
}

}  // namespace

template <std::floating_point T>
double validation_rmse(const NetworkParams<T>& params, const NetworkSpec& spec,
                       const std::vector<Sample<T>>& validation, std::size_t threads) {
  if (validation.empty()) throw ConfigError("validation set is empty");
  std::vector<double> sum_sq(validation.size(), 0.0);
  std::vector<std::size_t> count(validation.size(), 0);
  parallel_for(validation.size(), resolve_threads(threads), [&](std::size_t i) {
    const auto out = forward(params, spec, validation[i].input, ForwardMode::inference).output;
    const auto& target = validation[i].target;
    if (out.shape() != target.shape()) {
      throw ShapeError("validation target " + target.shape().to_string() + " does not match output " +
                       out.shape().to_string());
    }
    double s = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double d = static_cast<double>(out[j]) - static_cast<double>(target[j]);
      s += d * d;
    }
    sum_sq[i] = s;
    count[i] = out.size();
  });
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    s += sum_sq[i];
    n += count[i];
  }
  return std::sqrt(s / static_cast<double>(n));
}

template <std::floating_point T>
TrainResult<T> train(const NetworkSpec& spec, const std::vector<Sample<T>>& training,
                     const std::vector<Sample<T>>& validation, const ProtocolConfig& config,
                     std::uint64_t seed) {
  spec.validate();
  config.validate();
  if (training.empty()) throw ConfigError("training set is empty");
  if (validation.empty()) throw ConfigError("validation set is empty");
  const std::size_t threads = resolve_threads(config.threads);

  TrainResult<T> result;
  auto& rec = result.record;
  rec.seed = seed;
  rec.backprop = to_string(config.backprop);

  auto params = build<T>(spec, seed);
  auto opt = make_optimizer(params, AdamHyper{config.learning_rate});
  result.best_params = params;
  rec.best_val_rmse = std::numeric_limits<double>::infinity();

  std::seed_seq order_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 2u};
  std::mt19937_64 order_rng(order_seed);
  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t since_best = 0;
  const ForwardMode fmode = training_forward_mode(config.backprop);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochRecord er;
    er.epoch = epoch;
    er.learning_rate = opt.hyper.learning_rate;

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, order.size() - start);
      std::vector<ForwardResult<T>> fwd(b);
      parallel_for(b, threads, [&](std::size_t i) {
        fwd[i] = forward(params, spec, training[order[start + i]].input, fmode);
      });
      std::vector<Tensor<T>> outputs;
      std::vector<Tensor<T>> targets;
      outputs.reserve(b);
      targets.reserve(b);
      for (std::size_t i = 0; i < b; ++i) {
        outputs.push_back(std::move(fwd[i].output));
        targets.push_back(training[order[start + i]].target);
      }
      auto loss = rmse_loss<T>(outputs, targets);
      outputs.clear();
      targets.clear();
      if (!std::isfinite(loss.loss)) {
        rec.epochs.push_back(er);
        rec.epochs.back().train_loss = loss.loss;
        rec.epochs.back().val_rmse = std::numeric_limits<double>::quiet_NaN();
        rec.stop_reason = "diverged";
        rec.diagnostic = "non-finite training loss in epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batches + 1);
        return result;
      }

      std::vector<GradientSet<T>> grads(b);
      parallel_for(b, threads, [&](std::size_t i) {
        if (config.backprop == BackpropMode::naive) {
          grads[i] = backward_naive(params, spec, std::move(*fwd[i].naive), std::move(loss.grads[i]));
        } else {
          grads[i] = backward_efficient(params, spec, std::move(*fwd[i].checkpoints), std::move(loss.grads[i]));
        }
        grads[i].input = Tensor<T>();
      });
      fwd.clear();
      for (std::size_t i = 1; i < b; ++i) accumulate(grads[0], grads[i]);
      adam_step(opt, params, grads[0]);

      loss_sum += loss.loss;
      ++batches;
    }
    er.train_loss = loss_sum / static_cast<double>(batches);
    er.val_rmse = validation_rmse(params, spec, validation, threads);
    er.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rec.epochs.push_back(er);

    if (!std::isfinite(er.val_rmse)) {
      rec.stop_reason = "diverged";
      rec.diagnostic = "non-finite validation RMSE in epoch " + std::to_string(epoch);
      return result;
    }
    if (er.val_rmse < rec.best_val_rmse) {
      rec.best_val_rmse = er.val_rmse;
      rec.best_epoch = epoch;
      result.best_params = params;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= config.patience) {
        rec.stop_reason = "patience";
        return result;
      }
      if (since_best % config.lr_plateau == 0) {
        opt.hyper.learning_rate = std::max(opt.hyper.learning_rate * config.lr_decay, config.lr_floor);
      }
    }
  }
  rec.stop_reason = "max_epochs";
  return result;
}

template <std::floating_point T>
MultiSeedResult<T> train_multi_seed(const NetworkSpec& spec, const std::vector<Sample<T>>& training,
                                    const std::vector<Sample<T>>& validation,
                                    const ProtocolConfig& config, std::uint64_t base_seed,
                                    std::size_t seeds) {
  if (seeds == 0) throw ConfigError("multi-seed training needs at least one seed");
  MultiSeedResult<T> out;
  bool have = false;
  bool have_finite = false;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto run = train<T>(spec, training, validation, config, base_seed + s);
    const bool ok = !run.record.diverged() && run.record.best_epoch > 0;
    const bool better = !have || (ok && !have_finite) ||
                        (ok == have_finite && run.record.best_val_rmse < out.records[out.selected].best_val_rmse);
    out.records.push_back(run.record);
    if (better) {
      out.selected = s;
      out.best_params = std::move(run.best_params);
      have = true;
      have_finite = ok;
    }
  }
  return out;
}

std::string epochs_jsonl(const TrainRunRecord& record) {
  std::string out;
  for (const auto& e : record.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_rmse"] = e.val_rmse;
    j["lr"] = e.learning_rate;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string timings_jsonl(const TrainRunRecord& record) {
  std::string out;
  for (const auto& e : record.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["wall_time_ms"] = e.wall_time_ms;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string summary_json(const TrainRunRecord& record) {
  nlohmann::ordered_json j;
  j["seed"] = record.seed;
  j["backprop"] = record.backprop;
  j["epochs"] = record.epochs.size();
  j["stop_reason"] = record.stop_reason;
  j["best_epoch"] = record.best_epoch;
  j["best_val_rmse"] = record.best_epoch > 0 ? nlohmann::ordered_json(record.best_val_rmse) : nullptr;
  if (!record.diagnostic.empty()) j["diagnostic"] = record.diagnostic;
  return j.dump(2) + "\n";
}

#define REVPROP_INSTANTIATE(T)                                                                   \
  template double validation_rmse(const NetworkParams<T>&, const NetworkSpec&,                   \
                                  const std::vector<Sample<T>>&, std::size_t);                   \
  template TrainResult<T> train(const NetworkSpec&, const std::vector<Sample<T>>&,               \
                                const std::vector<Sample<T>>&, const ProtocolConfig&,            \
                                std::uint64_t);                                                  \
  template MultiSeedResult<T> train_multi_seed(const NetworkSpec&, const std::vector<Sample<T>>&, \
                                               const std::vector<Sample<T>>&,                    \
                                               const ProtocolConfig&, std::uint64_t, std::size_t);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
