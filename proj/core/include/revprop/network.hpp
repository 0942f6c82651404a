#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "revprop/graph.hpp"
#include "revprop/ops.hpp"
#include "revprop/reversible.hpp"
#include "revprop/tensor.hpp"

namespace revprop {

enum class Precision : std::uint8_t { f32, f64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

struct EspcnLayer {
  std::size_t kernel = 3;
  std::size_t out_channels = 0;
  std::size_t padding = 0;
  bool relu = true;

  friend bool operator==(const EspcnLayer&, const EspcnLayer&) = default;
};

/// Chain architecture: a stack of `blocks_per_stack` RevNet blocks precedes
/// each ESPCN layer; the final layer emits r^3 C channels (pre-shuffle).
struct NetworkSpec {
  std::size_t input_channels = 6;
  std::size_t upsampling_rate = 2;
  std::vector<EspcnLayer> layers = espcn_layers(6, 2, {50, 100});
  std::size_t blocks_per_stack = 4;
  Precision precision = Precision::f32;

  /// 3^3 valid -> ReLU -> 1^3 -> ReLU ... -> 3^3 valid to r^3 C, with the
  /// given hidden widths. Two hidden widths give the three-layer default.
  static std::vector<EspcnLayer> espcn_layers(std::size_t channels, std::size_t rate,
                                              const std::vector<std::size_t>& hidden_widths);

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  [[nodiscard]] std::size_t output_channels() const;
  /// Channel extent entering stack k (== input channels of layer k).
  [[nodiscard]] std::size_t stack_width(std::size_t k) const;
  [[nodiscard]] std::size_t num_stacks() const { return layers.size(); }

  /// Pre-shuffle output shape; throws ShapeError naming the layer index on underflow.
  [[nodiscard]] Shape output_shape(const Shape& input) const;
  /// Per-axis spatial shrink of the whole network (sum of k - 1 - 2 padding).
  [[nodiscard]] std::size_t spatial_shrink() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Every kernel of a network. Stack k precedes layer k.
template <std::floating_point T>
struct NetworkParams {
  std::vector<std::vector<RevNetBlock<T>>> stacks;
  std::vector<ConvKernel<T>> layers;

  [[nodiscard]] std::size_t numel() const;
};

template <std::floating_point T>
using KernelEntry = std::pair<std::string, ConvKernel<T>*>;
template <std::floating_point T>
using ConstKernelEntry = std::pair<std::string, const ConvKernel<T>*>;

/// Kernels in stable registry order with path names such as
/// "stack2.block1.f1.core" and "layer3". Order: stack1, layer1, stack2, ...
template <std::floating_point T>
std::vector<KernelEntry<T>> kernel_registry(NetworkParams<T>& params);
template <std::floating_point T>
std::vector<ConstKernelEntry<T>> kernel_registry(const NetworkParams<T>& params);

/// Zero-filled copy of the parameter structure.
template <std::floating_point T>
NetworkParams<T> zeros_like(const NetworkParams<T>& params, MemoryKind kind = MemoryKind::parameter);

/// Allocates zeroed parameters matching a spec.
template <std::floating_point T>
NetworkParams<T> allocate_params(const NetworkSpec& spec);

/// Zero-mean normal weights with variance 2 / fan_in; biases zero.
template <std::floating_point T>
void he_initialize(ConvKernel<T>& kernel, std::mt19937_64& rng);

/// Deterministic construction. ESPCN layers and RevNet stacks draw from
/// independent streams, so the ESPCN kernels for a seed do not depend on N.
/// RevNet expand kernels start at zero, making every block an identity.
template <std::floating_point T>
NetworkParams<T> build(const NetworkSpec& spec, std::uint64_t seed);

enum class ForwardMode : std::uint8_t { inference, naive_training, efficient_training };

/// Cached stack-boundary activations: entry k is the output of stack k
/// (the input of ESPCN layer k). One per stack, none per block.
template <std::floating_point T>
struct TrainingCheckpointSet {
  std::vector<Tensor<T>> activations;
};

/// Whole-network graph retained by naive training.
template <std::floating_point T>
struct NaiveCache {
  Graph<T> graph;
  typename Graph<T>::Node input = 0;
  typename Graph<T>::Node output = 0;
};

/// Debug-only copies of every block input, for checking reconstruction.
template <std::floating_point T>
struct ReconstructionAudit {
  std::vector<std::vector<Tensor<T>>> block_inputs;
  double max_relative_error = 0.0;
  std::size_t compared = 0;
};

template <std::floating_point T>
struct ForwardResult {
  Tensor<T> output;  ///< pre-shuffle, r^3 C channels
  std::optional<TrainingCheckpointSet<T>> checkpoints;
  std::optional<NaiveCache<T>> naive;
};

template <std::floating_point T>
ForwardResult<T> forward(const NetworkParams<T>& params, const NetworkSpec& spec, const Tensor<T>& x,
                         ForwardMode mode, ReconstructionAudit<T>* audit = nullptr);

}  // namespace revprop
