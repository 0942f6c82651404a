#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "revprop/ops.hpp"
#include "revprop/tensor.hpp"

namespace revprop {

/// Append-only reverse-mode tape over the primitive operators.
///
/// Nodes are recorded in topological order and hold their forward values
/// until the backward sweep passes them. A whole-network graph is the naive
/// training mode; short-lived graphs over a single layer or residual are the
/// local graphs of the memory-efficient schedule.
template <std::floating_point T>
class Graph {
 public:
  using Node = std::size_t;
  /// Maps a kernel used in the graph to the accumulator receiving its gradient.
  /// Returning nullptr skips the parameter gradient for that kernel.
  using GradSink = std::function<ConvKernel<T>*(const ConvKernel<T>&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  Node leaf(Tensor<T> value);
  Node conv(Node x, const ConvKernel<T>& kernel);
  Node relu(Node x);
  Node add(Node a, Node b);
  Node sub(Node a, Node b);
  std::pair<Node, Node> split(Node x);
  Node concat(Node a, Node b);

  [[nodiscard]] const Tensor<T>& value(Node n) const;
  /// Moves a node's value out of the graph.
  Tensor<T> take(Node n);

  /// Reverse sweep from `root`, seeded with `seed` (same shape as root's value).
  /// Interior values and gradients are released as soon as the sweep has
  /// passed them; leaf values are kept. Parameter gradients are added into
  /// the accumulators returned by `sink`.
  void backward(Node root, Tensor<T> seed, const GradSink& sink);

  /// Gradient reaching a leaf during backward (zeros if none did).
  Tensor<T> take_grad(Node leaf);

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] bool empty() const noexcept { return nodes_.empty(); }

 private:
  enum class Op : std::uint8_t { leaf, conv, relu, add, sub, split_lo, split_hi, concat };

  struct Record {
    Op op = Op::leaf;
    Node a = 0;
    Node b = 0;
    const ConvKernel<T>* kernel = nullptr;
    Tensor<T> value;
    Tensor<T> grad;
    Shape shape;
    bool has_grad = false;
  };

  Node push(Record r);
  void add_grad(Node n, Tensor<T> g);
  void add_grad_channels(Node n, const Tensor<T>& g, std::size_t first_channel);
  const Record& checked(Node n) const;

  std::vector<Record> nodes_;
};

}  // namespace revprop
