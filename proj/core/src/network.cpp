#include "revprop/network.hpp"

#include <cmath>

#include "revprop/error.hpp"

namespace revprop {

std::string to_string(Precision p) { return p == Precision::f32 ? "32" : "64"; }

Precision parse_precision(const std::string& s) {
  if (s == "32" || s == "f32" || s == "float") return Precision::f32;
  if (s == "64" || s == "f64" || s == "double") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (expected 32 or 64)");
}

std::vector<EspcnLayer> NetworkSpec::espcn_layers(std::size_t channels, std::size_t rate,
                                                  const std::vector<std::size_t>& hidden_widths) {
  std::vector<EspcnLayer> layers;
  const std::size_t n = hidden_widths.size() + 1;
  for (std::size_t i = 0; i < n; ++i) {
    EspcnLayer l;
    const bool last = i + 1 == n;
    // First and last layers are 3^3 valid convolutions; interior ones are 1^3.
    l.kernel = (i == 0 || last) ? 3 : 1;
    l.padding = 0;
    l.relu = !last;
    l.out_channels = last ? rate * rate * rate * channels : hidden_widths[i];
    layers.push_back(l);
  }
  return layers;
}

void NetworkSpec::validate() const {
  if (input_channels == 0) throw ConfigError("input_channels must be positive");
  if (upsampling_rate == 0) throw ConfigError("upsampling_rate must be positive");
  if (layers.empty()) throw ConfigError("network needs at least one ESPCN layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kernel == 0 || l.kernel % 2 == 0) {
      throw ConfigError("layer" + std::to_string(i + 1) + " kernel size must be odd, got " +
                        std::to_string(l.kernel));
    }
    if (l.out_channels == 0) {
      throw ConfigError("layer" + std::to_string(i + 1) + " must have positive output channels");
    }
    if (2 * l.padding > l.kernel - 1) {
      throw ConfigError("layer" + std::to_string(i + 1) + " padding exceeds (k-1)/2");
    }
  }
  const std::size_t r3 = upsampling_rate * upsampling_rate * upsampling_rate;
  if (layers.back().out_channels != r3 * input_channels) {
    throw ConfigError("final layer must output r^3 C = " + std::to_string(r3 * input_channels) +
                      " channels, got " + std::to_string(layers.back().out_channels));
  }
  if (blocks_per_stack > 0) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (stack_width(k) % 2 != 0) {
        throw ConfigError("stack" + std::to_string(k + 1) + " has odd channel extent " +
                          std::to_string(stack_width(k)) + "; RevNet insertion needs even channels");
      }
    }
  }
}

std::size_t NetworkSpec::output_channels() const { return layers.back().out_channels; }

std::size_t NetworkSpec::stack_width(std::size_t k) const {
  return k == 0 ? input_channels : layers.at(k - 1).out_channels;
}

Shape NetworkSpec::output_shape(const Shape& input) const {
  if (input.rank() != 4 || input[0] != input_channels) {
    throw ShapeError("network input must be (" + std::to_string(input_channels) +
                     ", X, Y, Z), got " + input.to_string());
  }
  std::vector<std::size_t> d = input.dims();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    for (std::size_t a = 1; a < 4; ++a) {
      const std::size_t padded = d[a] + 2 * l.padding;
      if (padded < l.kernel) {
        throw ShapeError("layer" + std::to_string(i + 1) + " output extent would be non-positive for input " +
                         input.to_string());
      }
      d[a] = padded - l.kernel + 1;
    }
    d[0] = l.out_channels;
  }
  return Shape(d);
}

std::size_t NetworkSpec::spatial_shrink() const {
  std::size_t s = 0;
  for (const auto& l : layers) s += l.kernel - 1 - 2 * l.padding;
  return s;
}

template <std::floating_point T>
std::size_t NetworkParams<T>::numel() const {
  std::size_t n = 0;
  for (const auto& [name, k] : kernel_registry(*this)) n += k->numel();
  return n;
}

namespace {

template <typename Params, typename Entry>
std::vector<Entry> registry_impl(Params& params) {
  std::vector<Entry> out;
  auto add_bottleneck = [&](const std::string& prefix, auto& b) {
    out.emplace_back(prefix + ".reduce", &b.reduce);
    out.emplace_back(prefix + ".core", &b.core);
    out.emplace_back(prefix + ".expand", &b.expand);
  };
  const std::size_t n = std::max(params.stacks.size(), params.layers.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (k < params.stacks.size()) {
      for (std::size_t b = 0; b < params.stacks[k].size(); ++b) {
        const std::string prefix = "stack" + std::to_string(k + 1) + ".block" + std::to_string(b + 1);
        add_bottleneck(prefix + ".f1", params.stacks[k][b].f1);
        add_bottleneck(prefix + ".f2", params.stacks[k][b].f2);
      }
    }
    if (k < params.layers.size()) out.emplace_back("layer" + std::to_string(k + 1), &params.layers[k]);
  }
  return out;
}

template <std::floating_point T>
void check_params(const NetworkParams<T>& params, const NetworkSpec& spec) {
  if (params.layers.size() != spec.layers.size() || params.stacks.size() != spec.layers.size()) {
    throw ConfigError("parameters do not match the network spec (layer/stack count)");
  }
  for (const auto& s : params.stacks) {
    if (s.size() != spec.blocks_per_stack) {
      throw ConfigError("parameters do not match the network spec (blocks per stack)");
    }
  }
}

}  // namespace

template <std::floating_point T>
std::vector<KernelEntry<T>> kernel_registry(NetworkParams<T>& params) {
  return registry_impl<NetworkParams<T>, KernelEntry<T>>(params);
}

template <std::floating_point T>
std::vector<ConstKernelEntry<T>> kernel_registry(const NetworkParams<T>& params) {
  return registry_impl<const NetworkParams<T>, ConstKernelEntry<T>>(params);
}

template <std::floating_point T>
NetworkParams<T> zeros_like(const NetworkParams<T>& params, MemoryKind kind) {
  NetworkParams<T> out;
  for (const auto& s : params.stacks) {
    auto& dst = out.stacks.emplace_back();
    for (const auto& b : s) dst.push_back(zeros_like(b, kind));
  }
  for (const auto& l : params.layers) out.layers.push_back(zeros_like(l, kind));
  return out;
}

template <std::floating_point T>
NetworkParams<T> allocate_params(const NetworkSpec& spec) {
  spec.validate();
  NetworkParams<T> p;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    auto& stack = p.stacks.emplace_back();
    for (std::size_t b = 0; b < spec.blocks_per_stack; ++b) stack.emplace_back(spec.stack_width(k));
    const auto& l = spec.layers[k];
    p.layers.emplace_back(l.out_channels, spec.stack_width(k), l.kernel, l.padding);
  }
  return p;
}

template <std::floating_point T>
void he_initialize(ConvKernel<T>& kernel, std::mt19937_64& rng) {
  const auto& s = kernel.weights.shape();
  const double fan_in = static_cast<double>(s[1] * s[2] * s[3] * s[4]);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& w : kernel.weights.data()) w = static_cast<T>(dist(rng));
  for (auto& b : kernel.bias.data()) b = T{0};
}

template <std::floating_point T>
NetworkParams<T> build(const NetworkSpec& spec, std::uint64_t seed) {
  auto p = allocate_params<T>(spec);
  const auto lo = static_cast<std::uint32_t>(seed);
  const auto hi = static_cast<std::uint32_t>(seed >> 32);
  std::seed_seq layer_seq{lo, hi, 0u};
  std::seed_seq stack_seq{lo, hi, 1u};
  std::mt19937_64 layer_rng(layer_seq);
  std::mt19937_64 stack_rng(stack_seq);
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    for (auto& block : p.stacks[k]) {
      for (auto* f : {&block.f1, &block.f2}) {
        he_initialize(f->reduce, stack_rng);
        he_initialize(f->core, stack_rng);
        // expand stays zero: a fresh block is an exact identity.
      }
    }
    he_initialize(p.layers[k], layer_rng);
  }
  return p;
}

template <std::floating_point T>
ForwardResult<T> forward(const NetworkParams<T>& params, const NetworkSpec& spec, const Tensor<T>& x,
                         ForwardMode mode, ReconstructionAudit<T>* audit) {
  check_params(params, spec);
  (void)spec.output_shape(x.shape());

  ForwardResult<T> result;
  if (mode == ForwardMode::naive_training) {
    NaiveCache<T> cache;
    auto& g = cache.graph;
    cache.input = g.leaf(x);
    auto n = cache.input;
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
      for (const auto& block : params.stacks[k]) n = record_revnet(g, n, block);
      n = g.conv(n, params.layers[k]);
      if (spec.layers[k].relu) n = g.relu(n);
    }
    cache.output = n;
    result.output = g.value(n);
    result.naive = std::move(cache);
    return result;
  }

  const bool keep = mode == ForwardMode::efficient_training;
  TrainingCheckpointSet<T> checkpoints;
  checkpoints.activations.reserve(params.layers.size());
  if (audit) {
    audit->block_inputs.assign(params.layers.size(), {});
  }

  const Tensor<T>* current = &x;
  Tensor<T> owned;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    for (const auto& block : params.stacks[k]) {
      if (audit) audit->block_inputs[k].push_back(*current);
      owned = revnet_forward(block, *current);
      current = &owned;
    }
    if (keep) {
      if (current == &x) {
        checkpoints.activations.push_back(x);
      } else {
        checkpoints.activations.push_back(std::move(owned));
      }
      current = &checkpoints.activations.back();
    }
    Tensor<T> next = conv3d_forward(*current, params.layers[k]);
    if (spec.layers[k].relu) next = relu_forward(next);
    owned = std::move(next);
    current = &owned;
  }
  result.output = std::move(owned);
  if (keep) result.checkpoints = std::move(checkpoints);
  return result;
}

#define REVPROP_INSTANTIATE(T)                                                                    \
  template struct NetworkParams<T>;                                                               \
  template std::vector<KernelEntry<T>> kernel_registry(NetworkParams<T>&);                        \
  template std::vector<ConstKernelEntry<T>> kernel_registry(const NetworkParams<T>&);             \
  template NetworkParams<T> zeros_like(const NetworkParams<T>&, MemoryKind);                      \
  template NetworkParams<T> allocate_params(const NetworkSpec&);                                  \
  template void he_initialize(ConvKernel<T>&, std::mt19937_64&);                                  \
  template NetworkParams<T> build(const NetworkSpec&, std::uint64_t);                             \
  template ForwardResult<T> forward(const NetworkParams<T>&, const NetworkSpec&, const Tensor<T>&, \
                                    ForwardMode, ReconstructionAudit<T>*);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
