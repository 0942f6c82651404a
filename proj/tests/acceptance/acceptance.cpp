// Acceptance driver: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (0 when all pass).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "commands.hpp"
#include "oracles/affine_fit.hpp"
#include "oracles/finite_difference.hpp"
#include "oracles/wilcoxon_bruteforce.hpp"
#include "revprop/data.hpp"
#include "revprop/engine.hpp"
#include "revprop/loss.hpp"
#include "revprop/metrics.hpp"
#include "revprop/trainer.hpp"
#include "run_config.hpp"
#include "support/random.hpp"

#ifndef REVPROP_TOY_CONFIG
#define REVPROP_TOY_CONFIG "configs/toy.cfg"
#endif

namespace revprop::acceptance {
namespace {

// Pinned tolerances and budgets.
constexpr double kEquivalenceTol = 1e-10;
constexpr double kFiniteDiffTol = 1e-6;
constexpr double kFiniteDiffStep = 1e-5;
constexpr double kInvertBlockTol = 1e-11;
constexpr double kInvertChainTol = 1e-9;
constexpr double kInvertFloatTol = 1e-4;
constexpr double kAffineR2 = 0.99;
constexpr double kFlatness = 0.05;
constexpr double kPeakRatioAtFour = 0.55;
constexpr double kOpRatioLo = 1.8;
constexpr double kOpRatioHi = 2.2;
constexpr double kNormTol = 1e-10;
constexpr double kLossRatio = 0.5;
constexpr double kDepthSlack = 0.05;
constexpr double kBudget1 = 120.0, kBudget2 = 120.0, kBudget3 = 30.0, kBudget6 = 60.0, kBudget8 = 600.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct ToyWorld {
  cli::RunConfig config;
  NetworkSpec spec;                      // toy spec at the configured depth
  std::vector<PatchPair> train_patches;  // training subjects only
  std::vector<PatchPair> val_patches;
  NormalizationStats stats;
  std::vector<Sample<double>> training, validation;
  std::vector<Volume> hr, lr;
};

ToyWorld make_world(const std::string& path) {
  ToyWorld w;
  w.config = cli::load_config(path);
  w.config.precision = Precision::f64;
  w.spec = w.config.network_spec();
  const auto& c = w.config;
  const std::size_t n = c.train_subject_count();
  std::vector<PatchPair> patches;
  for (std::size_t i = 0; i < n; ++i) {
    w.hr.push_back(generate_synthetic_subject(cli::derive_seed(c.seed, 1, i), c.synthetic()));
    w.lr.push_back(downsample_blockmean(w.hr.back(), c.upsampling_rate));
    for (auto& p : extract_patches(w.lr.back(), w.hr.back(), c.patches_per_subject, cli::derive_seed(c.seed, 2, i),
                                   c.geometry(), i))
      patches.push_back(std::move(p));
  }
  auto [tr, va] = split_train_validation(std::move(patches), c.train_fraction, cli::derive_seed(c.seed, 3, 0));
  w.train_patches = std::move(tr);
  w.val_patches = std::move(va);
  w.stats = compute_normalization(w.train_patches, c.upsampling_rate);
  w.training = make_samples<double>(w.train_patches, w.stats);
  w.validation = make_samples<double>(w.val_patches, w.stats);
  return w;
}

NetworkSpec with_blocks(NetworkSpec s, std::size_t n) {
  s.blocks_per_stack = n;
  return s;
}

Shape input_shape(const ToyWorld& w) {
  const auto p = w.config.patch_extent;
  return Shape{w.spec.input_channels, p, p, p};
}

// 1: efficient vs naive gradients.
Outcome gradient_equivalence(const ToyWorld& w) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t n : {0u, 1u, 2u, 4u}) {
    const auto spec = with_blocks(w.spec, n);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::mt19937_64 rng(seed * 7919 + n);
      auto params = build<double>(spec, seed);
      testing::randomize(params, rng, 0.2);
      auto x = testing::random_tensor<double>(input_shape(w), rng);
      auto target = testing::random_tensor<double>(spec.output_shape(x.shape()), rng);
      auto gn = forward_backward(params, spec, x, target, BackpropMode::naive);
      auto ge = forward_backward(params, spec, x, target, BackpropMode::efficient);
      auto rn = kernel_registry(gn.params), re = kernel_registry(ge.params);
      for (std::size_t i = 0; i < rn.size(); ++i) {
        worst = std::max({worst, relative_error(re[i].second->weights, rn[i].second->weights),
                          relative_error(re[i].second->bias, rn[i].second->bias)});
        compared += 2;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kEquivalenceTol && secs < kBudget1,
          std::to_string(compared) + " parameter tensors, max relative error " + fmt("%.2e", worst) + " (tol " +
              fmt("%.0e", kEquivalenceTol) + "), " + fmt("%.1f", secs) + " s"};
}

// 2: central differences for every operator.
Outcome finite_differences() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::vector<std::pair<std::string, double>> errs;
  auto fd = [](std::span<double> v, const std::function<double()>& f) {
    return oracle::central_differences(v, f, kFiniteDiffStep);
  };

  {  // conv3d, same and valid padding
    for (std::size_t pad : {0u, 1u}) {
      auto x = testing::random_tensor<double>(Shape{2, 4, 4, 4}, rng);
      auto k = testing::random_kernel<double>(3, 2, 3, pad, rng);
      auto w = testing::random_tensor<double>(conv3d_output_shape(x.shape(), k), rng);
      auto g = conv3d_backward(x, k, w);
      auto f = [&] { return oracle::project(conv3d_forward(x, k).data(), w.data()); };
      const std::string tag = pad ? "conv3d(same)" : "conv3d(valid)";
      errs.emplace_back(tag + " input", oracle::max_relative(g.input.data(), fd(x.data(), f)));
      errs.emplace_back(tag + " weights", oracle::max_relative(g.weights.data(), fd(k.weights.data(), f)));
      errs.emplace_back(tag + " bias", oracle::max_relative(g.bias.data(), fd(k.bias.data(), f)));
    }
  }
  {  // relu, away from the kink
    auto x = testing::random_tensor<double>(Shape{2, 3, 3, 3}, rng);
    for (auto& v : x.data())
      if (std::abs(v) < 1e-3) v = 0.25;
    auto w = testing::random_tensor<double>(x.shape(), rng);
    auto f = [&] { return oracle::project(relu_forward(x).data(), w.data()); };
    errs.emplace_back("relu", oracle::max_relative(relu_backward(x, w).data(), fd(x.data(), f)));
  }
  {  // shuffle as a permutation: its adjoint is inverse_shuffle
    auto x = testing::random_tensor<double>(Shape{16, 2, 2, 2}, rng);
    auto w = testing::random_tensor<double>(Shape{2, 4, 4, 4}, rng);
    auto f = [&] { return oracle::project(shuffle(x, 2).data(), w.data()); };
    errs.emplace_back("shuffle", oracle::max_relative(inverse_shuffle(w, 2).data(), fd(x.data(), f)));
  }
  {  // bottleneck
    RevNetBlock<double> blk(4);
    for (auto* k : {&blk.f1.reduce, &blk.f1.core, &blk.f1.expand}) {
      he_initialize(*k, rng);
      for (auto& b : k->bias.data()) b = 0.1 * static_cast<double>(rng() % 7) - 0.3;
    }
    auto& fn = blk.f1;
    auto x = testing::random_tensor<double>(Shape{2, 3, 3, 3}, rng);
    auto w = testing::random_tensor<double>(x.shape(), rng);
    Bottleneck<double> acc = zeros_like(fn);
    Graph<double> g;
    const auto xn = g.leaf(x);
    const auto out = record_bottleneck(g, xn, fn);
    g.backward(out, w, [&](const ConvKernel<double>& k) -> ConvKernel<double>* {
      return &k == &fn.reduce ? &acc.reduce : &k == &fn.core ? &acc.core : &acc.expand;
    });
    auto f = [&] { return oracle::project(bottleneck_forward(fn, x).data(), w.data()); };
    double e = oracle::max_relative(g.take_grad(xn).data(), fd(x.data(), f));
    for (auto [p, a] : {std::pair{&fn.reduce, &acc.reduce}, std::pair{&fn.core, &acc.core},
                        std::pair{&fn.expand, &acc.expand}}) {
      e = std::max(e, oracle::max_relative(a->weights.data(), fd(p->weights.data(), f)));
      e = std::max(e, oracle::max_relative(a->bias.data(), fd(p->bias.data(), f)));
    }
    errs.emplace_back("bottleneck", e);
  }
  {  // RevNet block through revnet_backward
    RevNetBlock<double> blk(4);
    for (auto* fn : {&blk.f1, &blk.f2})
      for (auto* k : {&fn->reduce, &fn->core, &fn->expand}) he_initialize(*k, rng);
    auto x = testing::random_tensor<double>(Shape{4, 3, 3, 3}, rng);
    auto w = testing::random_tensor<double>(x.shape(), rng);
    RevNetBlock<double> acc = zeros_like(blk);
    auto r = revnet_backward(blk, revnet_forward(blk, x), w, &acc);
    auto f = [&] { return oracle::project(revnet_forward(blk, x).data(), w.data()); };
    double e = oracle::max_relative(r.grad_x.data(), fd(x.data(), f));
    for (auto [fp, fa] : {std::pair{&blk.f1, &acc.f1}, std::pair{&blk.f2, &acc.f2}})
      for (auto [p, a] : {std::pair{&fp->reduce, &fa->reduce}, std::pair{&fp->core, &fa->core},
                          std::pair{&fp->expand, &fa->expand}}) {
        e = std::max(e, oracle::max_relative(a->weights.data(), fd(p->weights.data(), f)));
        e = std::max(e, oracle::max_relative(a->bias.data(), fd(p->bias.data(), f)));
      }
    errs.emplace_back("revnet block", e);
  }
  {  // RMSE loss over two pairs
    std::vector<Tensor<double>> preds{testing::random_tensor<double>(Shape{2, 3, 3, 3}, rng),
                                      testing::random_tensor<double>(Shape{2, 3, 3, 3}, rng)};
    std::vector<Tensor<double>> targets{testing::random_tensor<double>(Shape{2, 3, 3, 3}, rng),
                                        testing::random_tensor<double>(Shape{2, 3, 3, 3}, rng)};
    auto l = rmse_loss<double>(preds, targets);
    auto f = [&] { return rmse_loss<double>(preds, targets).loss; };
    double e = 0.0;
    for (std::size_t i = 0; i < 2; ++i) e = std::max(e, oracle::max_relative(l.grads[i].data(), fd(preds[i].data(), f)));
    errs.emplace_back("rmse loss", e);
  }
  double worst = 0.0;
  std::string worst_name;
  for (auto& [name, e] : errs)
    if (e >= worst) {
      worst = e;
      worst_name = name;
    }
  const double secs = seconds_since(t0);
  return {worst <= kFiniteDiffTol && secs < kBudget2,
          std::to_string(errs.size()) + " gradient checks, worst " + fmt("%.2e", worst) + " (" + worst_name +
              ", tol " + fmt("%.0e", kFiniteDiffTol) + "), " + fmt("%.1f", secs) + " s"};
}

// 3: inversion roundtrips.
Outcome inversion() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(33);
  auto he_block = [&](auto& b) {
    for (auto* fn : {&b.f1, &b.f2})
      for (auto* k : {&fn->reduce, &fn->core, &fn->expand}) he_initialize(*k, rng);
  };
  double single = 0.0, chain = 0.0, single32 = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    RevNetBlock<double> b(8);
    he_block(b);
    auto x = testing::random_tensor<double>(Shape{8, 7, 7, 7}, rng);
    single = std::max(single, relative_error(revnet_invert(b, revnet_forward(b, x)), x));
    RevNetBlock<float> bf(8);
    he_block(bf);
    auto xf = testing::random_tensor<float>(Shape{8, 7, 7, 7}, rng);
    single32 = std::max(single32, relative_error(revnet_invert(bf, revnet_forward(bf, xf)), xf));
  }
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<RevNetBlock<double>> stack(8, RevNetBlock<double>(8));
    for (auto& b : stack) he_block(b);
    auto x = testing::random_tensor<double>(Shape{8, 7, 7, 7}, rng);
    auto y = x;
    for (const auto& b : stack) y = revnet_forward(b, y);
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) y = revnet_invert(*it, y);
    chain = std::max(chain, relative_error(y, x));
  }
  const double secs = seconds_since(t0);
  return {single <= kInvertBlockTol && chain <= kInvertChainTol && single32 <= kInvertFloatTol && secs < kBudget3,
          "per block " + fmt("%.2e", single) + ", 8 chained " + fmt("%.2e", chain) + ", 32-bit " +
              fmt("%.2e", single32) + ", " + fmt("%.1f", secs) + " s"};
}

struct Profiles {
  std::vector<ProfileResult> naive, efficient;
};

Profiles profiles(const ToyWorld& w, const std::vector<std::size_t>& depths) {
  Profiles p;
  std::mt19937_64 rng(44);
  for (std::size_t n : depths) {
    const auto spec = with_blocks(w.spec, n);
    auto params = build<double>(spec, 1);
    auto x = testing::random_tensor<double>(input_shape(w), rng);
    auto t = testing::random_tensor<double>(spec.output_shape(x.shape()), rng);
    p.naive.push_back(profile_step(params, spec, x, t, BackpropMode::naive));
    p.efficient.push_back(profile_step(params, spec, x, t, BackpropMode::efficient));
  }
  return p;
}

// 4: memory law.
Outcome memory_law(const ToyWorld& w) {
  const std::vector<std::size_t> depths{1, 2, 4, 8};
  auto p = profiles(w, depths);
  std::vector<double> ns, naive, eff;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    ns.push_back(static_cast<double>(depths[i]));
    naive.push_back(static_cast<double>(p.naive[i].peak_elements));
    eff.push_back(static_cast<double>(p.efficient[i].peak_elements));
  }
  const auto fit = oracle::fit_affine(ns, naive);
  bool increasing = fit.slope > 0;
  for (std::size_t i = 1; i < naive.size(); ++i) increasing = increasing && naive[i] > naive[i - 1];
  const auto [lo, hi] = std::minmax_element(eff.begin(), eff.end());
  const double spread = *hi / *lo - 1.0;
  const double ratio = eff[2] / naive[2];
  std::string peaks;
  for (std::size_t i = 0; i < depths.size(); ++i)
    peaks += " N=" + std::to_string(depths[i]) + ":" + std::to_string(p.naive[i].peak_elements) + "/" +
             std::to_string(p.efficient[i].peak_elements);
  return {increasing && fit.r_squared >= kAffineR2 && spread <= kFlatness && ratio <= kPeakRatioAtFour,
          "naive R^2 " + fmt("%.5f", fit.r_squared) + " slope " + fmt("%.0f", fit.slope) + ", efficient spread " +
              fmt("%.2f%%", 100 * spread) + ", efficient/naive at N=4 " + fmt("%.3f", ratio) +
              "; peaks naive/efficient" + peaks};
}

// 5: forward-operator overhead.
Outcome compute_overhead(const ToyWorld& w) {
  const std::vector<std::size_t> depths{0, 1, 2, 4, 8};
  auto p = profiles(w, depths);
  bool ok = true;
  std::string detail = "fwd op ratio";
  for (std::size_t i = 0; i < depths.size(); ++i) {
    const double r = static_cast<double>(p.efficient[i].fwd_ops) / static_cast<double>(p.naive[i].fwd_ops);
    ok = ok && r >= kOpRatioLo && r <= kOpRatioHi;
    detail += " N=" + std::to_string(depths[i]) + ":" + fmt("%.3f", r);
  }
  detail += "; wall-clock ratio (reported only)";
  for (std::size_t i = 0; i < depths.size(); ++i)
    detail += " " + fmt("%.2f", p.efficient[i].wall_time_ms / std::max(1e-9, p.naive[i].wall_time_ms));
  return {ok, detail};
}

// 6: pipeline roundtrips.
Outcome pipeline(const ToyWorld& w) {
  const auto t0 = Clock::now();
  const auto& c = w.config;
  const auto g = c.geometry();
  const std::size_t r = c.upsampling_rate;
  const std::size_t fp = g.output_extent();

  bool consistent = true;
  for (const auto& p : w.train_patches) {
    Volume target(c.input_channels, {r * fp, r * fp, r * fp});
    target.data = shuffle(p.hr_target_pre_shuffle, r);
    const auto& k = p.location.corner;
    const Index3 at{k[0] + g.margin(), k[1] + g.margin(), k[2] + g.margin()};
    consistent = consistent && identical(downsample_blockmean(target, r).data, crop(w.lr[p.location.subject].data, at, fp));
    consistent = consistent && identical(p.lr, crop(w.lr[p.location.subject].data, k, g.input_extent));
  }

  const auto& hr = w.hr.front();
  const auto ext = hr.extents();
  std::vector<StitchPatch> tiles;
  const std::size_t lr_ext = ext[0] / r;
  for (auto x : tile_starts(lr_ext, fp))
    for (auto y : tile_starts(lr_ext, fp))
      for (auto z : tile_starts(lr_ext, fp)) tiles.push_back({{x, y, z}, crop(hr.data, {r * x, r * y, r * z}, r * fp)});
  const bool stitched = identical(stitch(tiles, hr.channels(), ext, r), hr.data);

  double mean_err = 0.0, var_err = 0.0;
  auto moments = [&](auto pick, std::size_t channels) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double s = 0, ss = 0, n = 0;
      for (const auto& smp : w.training) pick(smp, ch, s, ss, n);
      const double m = s / n;
      mean_err = std::max(mean_err, std::abs(m));
      var_err = std::max(var_err, std::abs(ss / n - m * m - 1.0));
    }
  };
  const std::size_t r3 = r * r * r;
  moments(
      [](const Sample<double>& smp, std::size_t ch, double& s, double& ss, double& n) {
        const std::size_t per = smp.input.shape().spatial_numel();
        for (std::size_t i = 0; i < per; ++i) {
          const double v = smp.input[ch * per + i];
          s += v;
          ss += v * v;
          n += 1;
        }
      },
      c.input_channels);
  moments(
      [r3](const Sample<double>& smp, std::size_t ch, double& s, double& ss, double& n) {
        const std::size_t per = smp.target.shape().spatial_numel();
        for (std::size_t q = ch * r3; q < (ch + 1) * r3; ++q)
          for (std::size_t i = 0; i < per; ++i) {
            const double v = smp.target[q * per + i];
            s += v;
            ss += v * v;
            n += 1;
          }
      },
      c.input_channels);

  std::mt19937_64 rng(66);
  bool shuffles = true;
  for (std::size_t rr : {1u, 2u, 3u}) {
    auto x = testing::random_tensor<double>(Shape{6 * rr * rr * rr, 4, 3, 5}, rng);
    auto y = testing::random_tensor<double>(Shape{6, 4 * rr, 3 * rr, 5 * rr}, rng);
    shuffles = shuffles && identical(inverse_shuffle(shuffle(x, rr), rr), x) &&
               identical(shuffle(inverse_shuffle(y, rr), rr), y);
  }
  const double secs = seconds_since(t0);
  return {consistent && stitched && mean_err <= kNormTol && var_err <= kNormTol && shuffles && secs < kBudget6,
          std::string("downsample/patch ") + (consistent ? "exact" : "MISMATCH") + " over " +
              std::to_string(w.train_patches.size()) + " patches, stitch identity " + (stitched ? "exact" : "MISMATCH") +
              ", normalized |mean| " + fmt("%.1e", mean_err) + " |var-1| " + fmt("%.1e", var_err) + ", shuffle " +
              (shuffles ? "exact" : "MISMATCH") + ", " + fmt("%.1f", secs) + " s"};
}

// 7: Wilcoxon exactness.
Outcome wilcoxon() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> len(1, 10), small(-3, 3);
  std::normal_distribution<double> nd;
  std::size_t checked = 0, mismatched = 0;
  while (checked < 100) {
    const auto n = static_cast<std::size_t>(len(rng));
    std::vector<double> a(n), b(n);
    const bool ties = checked % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = ties ? small(rng) : nd(rng);
      b[i] = ties ? small(rng) : nd(rng);
    }
    if (a == b) continue;
    auto got = wilcoxon_signed_rank(a, b);
    auto want = oracle::wilcoxon_enumerate(a, b);
    if (got.w != want.w || std::abs(got.p_two_sided - want.p) > 1e-12) ++mismatched;
    ++checked;
  }
  std::vector<double> a(8), b(8);
  for (std::size_t i = 0; i < 8; ++i) {
    a[i] = 9.0 + 0.1 * static_cast<double>(i);
    b[i] = a[i] - 0.5 - 0.05 * static_cast<double>(i);
  }
  auto r = wilcoxon_signed_rank(a, b);
  return {mismatched == 0 && r.w == 0.0,
          std::to_string(checked) + " instances vs 2^n enumeration, " + std::to_string(mismatched) +
              " mismatches; all-one-sign n=8: W=" + fmt("%.0f", r.w) + ", exact two-sided p=" +
              fmt("%.4f", r.p_two_sided)};
}

struct TrainingRuns {
  TrainResult<double> efficient, rerun, naive;
  double seconds = 0.0;
};

bool same_params(NetworkParams<double>& a, NetworkParams<double>& b) {
  auto ra = kernel_registry(a), rb = kernel_registry(b);
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (!identical(ra[i].second->weights, rb[i].second->weights) || !identical(ra[i].second->bias, rb[i].second->bias))
      return false;
  return true;
}

std::size_t first_divergent_epoch(const TrainRunRecord& a, const TrainRunRecord& b) {
  for (std::size_t i = 0; i < std::min(a.epochs.size(), b.epochs.size()); ++i)
    if (a.epochs[i].train_loss != b.epochs[i].train_loss || a.epochs[i].val_rmse != b.epochs[i].val_rmse)
      return i + 1;
  return a.epochs.size() == b.epochs.size() ? 0 : std::min(a.epochs.size(), b.epochs.size()) + 1;
}

// 8: end-to-end toy training.
Outcome toy_training(const ToyWorld& w, TrainingRuns& runs) {
  const auto t0 = Clock::now();
  auto protocol = w.config.protocol();
  protocol.backprop = BackpropMode::efficient;
  runs.efficient = train<double>(w.spec, w.training, w.validation, protocol, w.config.seed);
  runs.rerun = train<double>(w.spec, w.training, w.validation, protocol, w.config.seed);
  protocol.backprop = BackpropMode::naive;
  runs.naive = train<double>(w.spec, w.training, w.validation, protocol, w.config.seed);
  runs.seconds = seconds_since(t0);

  const auto& e = runs.efficient.record;
  const double first = e.epochs.front().train_loss, last = e.epochs.back().train_loss;
  const bool converged = !e.diverged() && e.epochs.size() <= 30 && last <= kLossRatio * first;
  const bool deterministic =
      epochs_jsonl(e) == epochs_jsonl(runs.rerun.record) && same_params(runs.efficient.best_params, runs.rerun.best_params);
  const bool identical_modes = epochs_jsonl(e) == epochs_jsonl(runs.naive.record);
  double max_gap = 0.0;
  for (std::size_t i = 0; i < std::min(e.epochs.size(), runs.naive.record.epochs.size()); ++i)
    max_gap = std::max(max_gap, std::abs(e.epochs[i].val_rmse - runs.naive.record.epochs[i].val_rmse) /
                                    runs.naive.record.epochs[i].val_rmse);
  std::string detail = std::to_string(w.training.size()) + " training / " + std::to_string(w.validation.size()) +
                       " validation patches, " + std::to_string(e.epochs.size()) + " epochs, loss " +
                       fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " (ratio " + fmt("%.3f", last / first) +
                       "), rerun " + (deterministic ? "identical" : "DIFFERS") + ", naive vs efficient ";
  if (identical_modes) {
    detail += "bit-identical";
  } else {
    detail += "NOT bit-identical (first differing epoch " +
              std::to_string(first_divergent_epoch(e, runs.naive.record)) + ", max relative val RMSE gap " +
              fmt("%.1e", max_gap) + ")";
  }
  detail += ", " + fmt("%.1f", runs.seconds) + " s";
  return {converged && deterministic && identical_modes && runs.seconds < kBudget8, detail};
}

// 9: depth vs plain ESPCN under the same budget.
Outcome depth_comparison(const ToyWorld& w, const TrainingRuns& runs) {
  auto protocol = w.config.protocol();
  protocol.backprop = BackpropMode::efficient;
  auto plain = train<double>(with_blocks(w.spec, 0), w.training, w.validation, protocol, w.config.seed);
  const double base = plain.record.best_val_rmse;
  const double deep = runs.efficient.record.best_val_rmse;
  return {deep <= (1.0 + kDepthSlack) * base,
          "best validation RMSE ESPCN " + fmt("%.5f", base) + " (epoch " + std::to_string(plain.record.best_epoch) +
              "), ESPCN-RN" + std::to_string(w.spec.blocks_per_stack) + " " + fmt("%.5f", deep) + " (epoch " +
              std::to_string(runs.efficient.record.best_epoch) + "), ratio " + fmt("%.4f", deep / base)};
}

}  // namespace
}  // namespace revprop::acceptance

int main(int argc, char** argv) {
  using namespace revprop::acceptance;
  const std::string config = argc > 1 ? argv[1] : REVPROP_TOY_CONFIG;
  const auto world = make_world(config);
  std::printf("toy config %s: widths", config.c_str());
  for (auto wdt : world.config.espcn_widths) std::printf(" %zu", wdt);
  std::printf(", N=%zu, %zu training subjects\n", world.spec.blocks_per_stack, world.config.train_subject_count());
  std::fflush(stdout);

  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  TrainingRuns runs;
  report(1, "gradient equivalence", gradient_equivalence(world));
  report(2, "finite differences", finite_differences());
  report(3, "inversion", inversion());
  report(4, "memory law", memory_law(world));
  report(5, "compute overhead", compute_overhead(world));
  report(6, "pipeline roundtrips", pipeline(world));
  report(7, "wilcoxon", wilcoxon());
  report(8, "toy training", toy_training(world, runs));
  report(9, "depth vs plain espcn", depth_comparison(world, runs));
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
