#include "revprop/engine.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "revprop/error.hpp"
#include "revprop/loss.hpp"

namespace revprop {

std::string to_string(BackpropMode m) { return m == BackpropMode::naive ? "naive" : "efficient"; }

BackpropMode parse_backprop_mode(const std::string& s) {
  if (s == "naive") return BackpropMode::naive;
  if (s == "efficient") return BackpropMode::efficient;
  throw ConfigError("unknown backprop mode '" + s + "' (expected naive or efficient)");
}

template <std::floating_point T>
GradientSet<T> zero_gradients(const NetworkParams<T>& params) {
  return GradientSet<T>{zeros_like(params), Tensor<T>()};
}

template <std::floating_point T>
void accumulate(GradientSet<T>& acc, const GradientSet<T>& other) {
  auto dst = kernel_registry(acc.params);
  auto src = kernel_registry(other.params);
  if (dst.size() != src.size()) throw ConfigError("gradient registries differ in size");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    accumulate(dst[i].second->weights, src[i].second->weights);
    accumulate(dst[i].second->bias, src[i].second->bias);
  }
  if (acc.input.empty()) {
    acc.input = other.input;
  } else if (!other.input.empty()) {
    accumulate(acc.input, other.input);
  }
}

namespace {

template <std::floating_point T>
typename Graph<T>::GradSink network_sink(const NetworkParams<T>& params, NetworkParams<T>& grads) {
  auto src = kernel_registry(params);
  auto dst = kernel_registry(grads);
  auto map = std::make_shared<std::unordered_map<const ConvKernel<T>*, ConvKernel<T>*>>();
  for (std::size_t i = 0; i < src.size(); ++i) (*map)[src[i].second] = dst[i].second;
  return [map](const ConvKernel<T>& k) -> ConvKernel<T>* {
    auto it = map->find(&k);
    return it == map->end() ? nullptr : it->second;
  };
}

}  // namespace

template <std::floating_point T>
GradientSet<T> backward_naive(const NetworkParams<T>& params, const NetworkSpec& spec,
                              NaiveCache<T>&& cache, Tensor<T> grad_output) {
  if (cache.graph.empty()) {
    throw std::invalid_argument("backward_naive needs the graph from a naive-training forward");
  }
  if (params.layers.size() != spec.layers.size()) {
    throw ConfigError("parameters do not match the network spec");
  }
  NaiveCache<T> local = std::move(cache);
  auto grads = zero_gradients(params);
  local.graph.backward(local.output, std::move(grad_output), network_sink(params, grads.params));
  grads.input = local.graph.take_grad(local.input);
  return grads;
}

template <std::floating_point T>
GradientSet<T> backward_efficient(const NetworkParams<T>& params, const NetworkSpec& spec,
                                  TrainingCheckpointSet<T>&& checkpoints, Tensor<T> grad_output,
                                  ReconstructionAudit<T>* audit) {
  const std::size_t stacks = spec.layers.size();
  if (checkpoints.activations.size() != stacks || params.layers.size() != stacks) {
    throw std::invalid_argument("backward_efficient expected " + std::to_string(stacks) +
                                " checkpoints, got " + std::to_string(checkpoints.activations.size()));
  }
  TrainingCheckpointSet<T> cache = std::move(checkpoints);
  auto grads = zero_gradients(params);
  const auto sink = network_sink(params, grads.params);

  Tensor<T> grad = std::move(grad_output);
  Tensor<T> act;
  for (std::size_t k = stacks; k-- > 0;) {
    act = std::move(cache.activations[k]);

    // Local one-layer graph through ESPCN layer k.
    {
      Graph<T> g;
      const auto in = g.leaf(std::move(act));
      auto out = g.conv(in, params.layers[k]);
      if (spec.layers[k].relu) out = g.relu(out);
      g.backward(out, std::move(grad), sink);
      grad = g.take_grad(in);
      act = g.take(in);
    }

    // Stack k, block by block from its output.
    const auto& stack = params.stacks[k];
    for (std::size_t b = stack.size(); b-- > 0;) {
      auto step = revnet_backward(stack[b], std::move(act), std::move(grad), &grads.params.stacks[k][b]);
      if (audit && k < audit->block_inputs.size() && b < audit->block_inputs[k].size()) {
        const double err = relative_error(step.x, audit->block_inputs[k][b]);
        audit->max_relative_error = std::max(audit->max_relative_error, err);
        ++audit->compared;
      }
      act = std::move(step.x);
      grad = std::move(step.grad_x);
    }
    act = Tensor<T>();
  }
  grads.input = std::move(grad);
  return grads;
}

template <std::floating_point T>
GradientSet<T> forward_backward(const NetworkParams<T>& params, const NetworkSpec& spec,
                                const Tensor<T>& x, const Tensor<T>& target, BackpropMode mode,
                                double* loss) {
  auto fwd = forward(params, spec, x, training_forward_mode(mode));
  auto l = rmse_loss(fwd.output, target);
  if (loss) *loss = l.loss;
  fwd.output = Tensor<T>();
  auto grad = std::move(l.grads.front());
  l.grads.clear();
  if (mode == BackpropMode::naive) {
    return backward_naive(params, spec, std::move(*fwd.naive), std::move(grad));
  }
  return backward_efficient(params, spec, std::move(*fwd.checkpoints), std::move(grad));
}

template <std::floating_point T>
ProfileResult profile_step(const NetworkParams<T>& params, const NetworkSpec& spec, const Tensor<T>& x,
                           const Tensor<T>& target, BackpropMode mode) {
  ProfileResult r;
  r.mode = mode;
  r.n_blocks = spec.blocks_per_stack;
  r.parameter_elements = static_cast<std::int64_t>(params.numel());
  LedgerScope scope;
  const auto t0 = std::chrono::steady_clock::now();
  { auto grads = forward_backward(params, spec, x, target, mode); }
  const auto t1 = std::chrono::steady_clock::now();
  const auto snap = scope.snapshot();
  r.peak_elements = snap.peak_elements;
  r.fwd_ops = snap.fwd_op_count;
  r.bwd_ops = snap.bwd_op_count;
  r.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return r;
}

std::string to_json_line(const ProfileResult& r) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(r.mode);
  j["n_blocks"] = r.n_blocks;
  j["peak_elements"] = r.peak_elements;
  j["fwd_ops"] = r.fwd_ops;
  j["bwd_ops"] = r.bwd_ops;
  j["wall_time_ms"] = r.wall_time_ms;
  return j.dump();
}

std::string profile_csv(const std::vector<ProfileResult>& rows) {
  std::map<std::size_t, std::int64_t> naive_peak;
  std::map<std::size_t, std::int64_t> efficient_peak;
  for (const auto& r : rows) {
    (r.mode == BackpropMode::naive ? naive_peak : efficient_peak)[r.n_blocks] = r.peak_elements;
  }
  std::ostringstream os;
  os << "mode,n_blocks,peak_elements,parameter_elements,fwd_ops,bwd_ops,naive_over_efficient_peak,"
        "wall_time_ms\n";
  for (const auto& r : rows) {
    os << to_string(r.mode) << ',' << r.n_blocks << ',' << r.peak_elements << ','
       << r.parameter_elements << ',' << r.fwd_ops << ',' << r.bwd_ops << ',';
    auto n = naive_peak.find(r.n_blocks);
    auto e = efficient_peak.find(r.n_blocks);
    if (n != naive_peak.end() && e != efficient_peak.end() && e->second > 0) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", static_cast<double>(n->second) / static_cast<double>(e->second));
      os << buf;
    }
    char wt[32];
    std::snprintf(wt, sizeof wt, "%.3f", r.wall_time_ms);
    os << ',' << wt << '\n';
  }
  return os.str();
}

#define REVPROP_INSTANTIATE(T)                                                                     \
  template GradientSet<T> zero_gradients(const NetworkParams<T>&);                                 \
  template void accumulate(GradientSet<T>&, const GradientSet<T>&);                                \
  template GradientSet<T> backward_naive(const NetworkParams<T>&, const NetworkSpec&,              \
                                         NaiveCache<T>&&, Tensor<T>);                              \
  template GradientSet<T> backward_efficient(const NetworkParams<T>&, const NetworkSpec&,          \
                                             TrainingCheckpointSet<T>&&, Tensor<T>,                \
                                             ReconstructionAudit<T>*);                             \
  template GradientSet<T> forward_backward(const NetworkParams<T>&, const NetworkSpec&,            \
                                           const Tensor<T>&, const Tensor<T>&, BackpropMode,       \
                                           double*);                                               \
  template ProfileResult profile_step(const NetworkParams<T>&, const NetworkSpec&, const Tensor<T>&, \
                                      const Tensor<T>&, BackpropMode);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
