#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "revprop/error.hpp"
#include "revprop/inference.hpp"
#include "revprop/metrics.hpp"
#include "revprop/model_io.hpp"
#include "revprop/parallel.hpp"
#include "revprop/volume_io.hpp"

namespace revprop::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::ostream& log_of(const CommandContext& ctx) { return ctx.log ? *ctx.log : std::cout; }
std::ostream& err_of(const CommandContext& ctx) { return ctx.err ? *ctx.err : std::cerr; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  os.flush();
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

void echo_config(const fs::path& dir, const RunConfig& c) { write_text(dir / "config.resolved.cfg", to_text(c)); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json json_opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json stats_to_json(const NormalizationStats& s) {
  json j;
  j["rate"] = s.rate;
  j["lr_mean"] = s.lr_mean;
  j["lr_var"] = s.lr_var;
  j["hr_mean"] = s.hr_mean;
  j["hr_var"] = s.hr_var;
  return j;
}

NormalizationStats stats_from_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read normalisation statistics " + path.string());
  NormalizationStats s;
  try {
    const auto j = json::parse(is);
    s.rate = j.at("rate").get<std::size_t>();
    s.lr_mean = j.at("lr_mean").get<std::vector<double>>();
    s.lr_var = j.at("lr_var").get<std::vector<double>>();
    s.hr_mean = j.at("hr_mean").get<std::vector<double>>();
    s.hr_var = j.at("hr_var").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

template <std::floating_point T>
int train_typed(const CommandContext& ctx, const fs::path& out, const NetworkSpec& spec,
                const std::vector<PatchPair>& train_patches, const std::vector<PatchPair>& val_patches) {
  const auto& c = ctx.config;
  auto& log = log_of(ctx);
  const auto stats = compute_normalization(train_patches, c.upsampling_rate);
  const auto train_set = make_samples<T>(train_patches, stats);
  const auto val_set = make_samples<T>(val_patches, stats);
  const auto protocol = c.protocol();

  auto write_record = [&](const std::string& prefix, const TrainRunRecord& r) {
    write_text(out / (prefix + "_record.jsonl"), epochs_jsonl(r));
    write_text(out / (prefix + "_timing.jsonl"), timings_jsonl(r));
    write_text(out / (prefix + "_summary.json"), summary_json(r));
  };

  NetworkParams<T> best;
  bool diverged = false;
  std::string diagnostic;
  if (c.multi_seed) {
    auto res = train_multi_seed<T>(spec, train_set, val_set, protocol, c.seed, c.seeds);
    json summary;
    summary["selected_seed"] = res.records[res.selected].seed;
    summary["selected_best_val_rmse"] = res.records[res.selected].best_val_rmse;
    json runs = json::array();
    for (const auto& r : res.records) {
      write_record("seed_" + std::to_string(r.seed), r);
      json run;
      run["seed"] = r.seed;
      run["stop_reason"] = r.stop_reason;
      run["best_epoch"] = r.best_epoch;
      run["best_val_rmse"] = r.best_epoch > 0 ? json(r.best_val_rmse) : json(nullptr);
      runs.push_back(run);
      log << "seed " << r.seed << ": best validation RMSE " << fmt(r.best_val_rmse) << " at epoch "
          << r.best_epoch << " (" << r.stop_reason << ")\n";
    }
    summary["runs"] = runs;
    write_text(out / "train_summary.json", summary.dump(2) + "\n");
    diverged = res.records[res.selected].diverged();
    diagnostic = res.records[res.selected].diagnostic;
    best = std::move(res.best_params);
  } else {
    auto res = train<T>(spec, train_set, val_set, protocol, c.seed);
    write_record("train", res.record);
    for (const auto& e : res.record.epochs) {
      log << "epoch " << e.epoch << ": train loss " << fmt(e.train_loss) << ", validation RMSE "
          << fmt(e.val_rmse) << ", lr " << fmt(e.learning_rate) << "\n";
    }
    diverged = res.record.diverged();
    diagnostic = res.record.diagnostic;
    best = std::move(res.best_params);
  }
  if (diverged) {
    err_of(ctx) << "training diverged: " << diagnostic << "\n";
    return 3;
  }
  save_model(out / "model.rvpm", spec, best);
  write_text(norm_path(out / "model.rvpm"), stats_to_json(stats).dump(2) + "\n");
  log << "wrote " << (out / "model.rvpm").string() << "\n";
  return 0;
}

using Predictor = std::function<Tensor<double>(const Volume& lr, const Volume& hr)>;

template <std::floating_point T>
Predictor model_predictor(const fs::path& path, const RunConfig& c) {
  auto model = std::make_shared<LoadedModel<T>>(load_model<T>(path));
  auto stats = std::make_shared<NormalizationStats>(stats_from_json(norm_path(path)));
  const std::size_t patch = c.patch_extent;
  return [model, stats, patch](const Volume& lr, const Volume& hr) {
    if (lr.channels() != model->spec.input_channels) {
      throw ShapeError("model expects " + std::to_string(model->spec.input_channels) +
                       " channels, data has " + std::to_string(lr.channels()));
    }
    if (hr.extents()[0] != lr.extents()[0] * model->spec.upsampling_rate) {
      throw ShapeError("model upsampling rate " + std::to_string(model->spec.upsampling_rate) +
                       " does not match the HR/LR extent ratio of the data");
    }
    if (stats->lr_mean.size() != lr.channels() || stats->rate != model->spec.upsampling_rate) {
      throw ShapeError("normalisation statistics do not match the model");
    }
    return predict_volume(model->params, model->spec, lr, *stats, patch);
  };
}

Predictor make_predictor(const std::string& name, const RunConfig& c) {
  if (name == "@truth") {
    return [](const Volume&, const Volume& hr) { return hr.data; };
  }
  const auto spec = read_model_spec(name);
  if (spec.precision == Precision::f32) return model_predictor<float>(name, c);
  return model_predictor<double>(name, c);
}

struct ModelScores {
  std::string name;
  std::vector<RegionRmse> per_subject;
};

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  return {m, sd};
}

template <std::floating_point T>
ProfileResult profile_one(const NetworkSpec& spec, std::size_t patch, std::uint64_t seed, BackpropMode mode) {
  const auto params = build<T>(spec, seed);
  std::mt19937_64 rng(derive_seed(seed, 7, 0));
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor<T> x(Shape{spec.input_channels, patch, patch, patch}, MemoryKind::untracked);
  for (auto& v : x.data()) v = static_cast<T>(nd(rng));
  Tensor<T> y(spec.output_shape(x.shape()), MemoryKind::untracked);
  for (auto& v : y.data()) v = static_cast<T>(nd(rng));
  return profile_step(params, spec, x, y, mode);
}

}  // namespace

fs::path hr_path(const fs::path& dir, std::size_t subject) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject_%03zu_hr.rvol", subject);
  return dir / buf;
}

fs::path lr_path(const fs::path& dir, std::size_t subject) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject_%03zu_lr.rvol", subject);
  return dir / buf;
}

fs::path norm_path(const fs::path& model) {
  auto p = model;
  p.replace_extension(".norm.json");
  return p;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 over a combined key
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream * 0x100000001b3ULL + index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int cmd_gen_data(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  const fs::path dir = ctx.out_dir.empty() ? fs::path(c.data_dir) : ctx.out_dir;
  const bool existed = fs::exists(dir);
  std::vector<fs::path> written;
  try {
    ensure_dir(dir);
    std::vector<Volume> hr(c.subjects), lr(c.subjects);
    parallel_for(c.subjects, worker_threads(), [&](std::size_t i) {
      hr[i] = generate_synthetic_subject(derive_seed(c.seed, 1, i), c.synthetic());
      lr[i] = downsample_blockmean(hr[i], c.upsampling_rate);
    });
    for (std::size_t i = 0; i < c.subjects; ++i) {
      written.push_back(hr_path(dir, i));
      save_volume(written.back(), hr[i]);
      written.push_back(lr_path(dir, i));
      save_volume(written.back(), lr[i]);
    }
    written.push_back(dir / "config.resolved.cfg");
    echo_config(dir, c);
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (!existed) fs::remove(dir, ec);
    throw;
  }
  log_of(ctx) << "wrote " << c.subjects << " subject pairs to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  if (c.train_subject_count() == 0) throw ConfigError("no training subjects: subjects equals test_subjects");
  const fs::path out = ctx.out_dir.empty() ? fs::path("run") : ctx.out_dir;
  const fs::path data(c.data_dir);
  const auto spec = c.network_spec();
  const auto geom = c.geometry();

  std::vector<PatchPair> patches;
  for (std::size_t i = 0; i < c.train_subject_count(); ++i) {
    if (!fs::exists(hr_path(data, i)) || !fs::exists(lr_path(data, i))) {
      throw std::runtime_error("missing data for subject " + std::to_string(i) + " in " + data.string() +
                               " (run gen-data first)");
    }
    const auto hr = load_volume(hr_path(data, i));
    const auto lr = load_volume(lr_path(data, i));
    auto p = extract_patches(lr, hr, c.patches_per_subject, derive_seed(c.seed, 2, i), geom, i);
    for (auto& x : p) patches.push_back(std::move(x));
  }
  auto [train_patches, val_patches] =
      split_train_validation(std::move(patches), c.train_fraction, derive_seed(c.seed, 3, 0));
  log_of(ctx) << "training on " << train_patches.size() << " patches, validating on " << val_patches.size()
              << "\n";

  ensure_dir(out);
  echo_config(out, c);
  if (c.precision == Precision::f32) return train_typed<float>(ctx, out, spec, train_patches, val_patches);
  return train_typed<double>(ctx, out, spec, train_patches, val_patches);
}

int cmd_eval(const CommandContext& ctx) {
  const auto& c = ctx.config;
  c.validate();
  if (ctx.models.empty()) throw ConfigError("eval needs at least one --model");
  if (c.test_subjects == 0) throw ConfigError("eval needs test_subjects >= 1");
  const fs::path out = ctx.out_dir.empty() ? fs::path("eval") : ctx.out_dir;
  const fs::path data(c.data_dir);

  std::vector<Predictor> predictors;
  for (const auto& m : ctx.models) predictors.push_back(make_predictor(m, c));

  std::vector<ModelScores> scores(ctx.models.size());
  for (std::size_t k = 0; k < ctx.models.size(); ++k) scores[k].name = ctx.models[k];
  const std::size_t first = c.subjects - c.test_subjects;
  for (std::size_t i = first; i < c.subjects; ++i) {
    const auto hr = load_volume(hr_path(data, i));
    const auto lr = load_volume(lr_path(data, i));
    for (std::size_t k = 0; k < predictors.size(); ++k) {
      const auto pred = predictors[k](lr, hr);
      if (pred.shape() != hr.data.shape()) {
        throw ShapeError("prediction " + pred.shape().to_string() + " does not match HR extent " +
                         hr.data.shape().to_string());
      }
      scores[k].per_subject.push_back(evaluate_rmse(pred, hr.data, hr.mask, c.interior_margin));
    }
  }

  ensure_dir(out);
  echo_config(out, c);
  std::ostringstream per, summary;
  per << "model,subject,rmse_interior,rmse_exterior,rmse_total\n";
  summary << "model,subjects,rmse_interior,rmse_exterior,rmse_total\n";
  json report;
  json models = json::array();
  auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& s : scores) {
    std::vector<double> in, ex, tot;
    json subj = json::array();
    for (std::size_t j = 0; j < s.per_subject.size(); ++j) {
      const auto& r = s.per_subject[j];
      per << s.name << ',' << first + j << ',' << cell(r.interior) << ',' << cell(r.exterior) << ','
          << cell(r.total) << '\n';
      if (r.interior) in.push_back(*r.interior);
      if (r.exterior) ex.push_back(*r.exterior);
      if (r.total) tot.push_back(*r.total);
      json e;
      e["subject"] = first + j;
      e["rmse_interior"] = json_opt(r.interior);
      e["rmse_exterior"] = json_opt(r.exterior);
      e["rmse_total"] = json_opt(r.total);
      subj.push_back(e);
    }
    auto ms = [](const std::vector<double>& v) {
      if (v.empty()) return std::string();
      auto [m, sd] = mean_std(v);
      return fmt(m) + " ± " + fmt(sd);
    };
    summary << s.name << ',' << s.per_subject.size() << ',' << ms(in) << ',' << ms(ex) << ',' << ms(tot) << '\n';
    json mj;
    mj["model"] = s.name;
    mj["subjects"] = subj;
    models.push_back(mj);
    log_of(ctx) << s.name << ": total RMSE " << ms(tot) << "\n";
  }
  report["models"] = models;

  if (scores.size() >= 2) {
    json tests = json::array();
    for (std::size_t k = 1; k < scores.size(); ++k) {
      std::vector<double> a, b;
      for (std::size_t j = 0; j < scores[0].per_subject.size(); ++j) {
        a.push_back(scores[0].per_subject[j].total.value_or(std::nan("")));
        b.push_back(scores[k].per_subject[j].total.value_or(std::nan("")));
      }
      json t;
      t["model_a"] = scores[0].name;
      t["model_b"] = scores[k].name;
      try {
        const auto w = wilcoxon_signed_rank(a, b);
        t["n"] = w.n;
        t["W"] = w.w;
        t["W_plus"] = w.w_plus;
        t["W_minus"] = w.w_minus;
        t["p_two_sided"] = w.p_two_sided;
        log_of(ctx) << "Wilcoxon " << scores[0].name << " vs " << scores[k].name << ": W = " << w.w
                    << ", p = " << fmt(w.p_two_sided) << "\n";
      } catch (const DataError& e) {
        t["error"] = e.what();
      }
      tests.push_back(t);
    }
    report["wilcoxon"] = tests;
  }
  write_text(out / "eval_subjects.csv", per.str());
  write_text(out / "eval_summary.csv", summary.str());
  write_text(out / "eval.json", report.dump(2) + "\n");
  return 0;
}

int cmd_profile(const CommandContext& ctx) {
  auto c = ctx.config;
  c.validate();
  const fs::path out = ctx.out_dir.empty() ? fs::path("profile") : ctx.out_dir;
  std::vector<ProfileResult> rows;
  for (auto n : c.profile_blocks) {
    for (auto mode : c.profile_modes) {
      auto spec = c.network_spec();
      spec.blocks_per_stack = n;
      spec.validate();
      rows.push_back(spec.precision == Precision::f32 ? profile_one<float>(spec, c.patch_extent, c.seed, mode)
                                                      : profile_one<double>(spec, c.patch_extent, c.seed, mode));
      log_of(ctx) << to_json_line(rows.back()) << "\n";
    }
  }
  ensure_dir(out);
  echo_config(out, c);
  std::string jl;
  for (const auto& r : rows) jl += to_json_line(r) + "\n";
  write_text(out / "profile.csv", profile_csv(rows));
  write_text(out / "profile.jsonl", jl);
  return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reversible-block ESPCN training, evaluation and memory profiling", "revprop"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> models;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the configured seed");
  };
  auto* gen = app.add_subcommand("gen-data", "write synthetic HR/LR subject volumes");
  auto* tr = app.add_subcommand("train", "train a model on generated subjects");
  auto* ev = app.add_subcommand("eval", "evaluate models on the test subjects");
  auto* pr = app.add_subcommand("profile", "measure peak activation memory per mode and depth");
  for (auto* s : {gen, tr, ev, pr}) add_common(s);
  ev->add_option("--model", models, "model file, or @truth (repeatable)")->required();

  std::vector<std::string> argv_store = args;
  std::reverse(argv_store.begin(), argv_store.end());
  try {
    app.parse(argv_store);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    CommandContext ctx;
    ctx.config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) ctx.config.seed = *seed;
    ctx.out_dir = out_dir;
    ctx.models = models;
    ctx.log = &out;
    ctx.err = &err;
    if (gen->parsed()) return cmd_gen_data(ctx);
    if (tr->parsed()) return cmd_train(ctx);
    if (ev->parsed()) return cmd_eval(ctx);
    return cmd_profile(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace revprop::cli
