#include "revprop/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "revprop/error.hpp"

namespace revprop {

template <std::floating_point T>
auto Graph<T>::checked(Node n) const -> const Record& {
  if (n >= nodes_.size()) throw std::out_of_range("graph node " + std::to_string(n) + " does not exist");
  return nodes_[n];
}

template <std::floating_point T>
auto Graph<T>::push(Record r) -> Node {
  r.shape = r.value.shape();
  nodes_.push_back(std::move(r));
  return nodes_.size() - 1;
}

template <std::floating_point T>
auto Graph<T>::leaf(Tensor<T> value) -> Node {
  Record r;
  r.op = Op::leaf;
  r.value = std::move(value);
  return push(std::move(r));
}

template <std::floating_point T>
auto Graph<T>::conv(Node x, const ConvKernel<T>& kernel) -> Node {
  Record r;
  r.op = Op::conv;
  r.a = x;
  r.kernel = &kernel;
  r.value = conv3d_forward(value(x), kernel);
  return push(std::move(r));
}

template <std::floating_point T>
auto Graph<T>::relu(Node x) -> Node {
  Record r;
  r.op = Op::relu;
  r.a = x;
  r.value = relu_forward(value(x));
  return push(std::move(r));
}

template <std::floating_point T>
auto Graph<T>::add(Node a, Node b) -> Node {
  Record r;
  r.op = Op::add;
  r.a = a;
  r.b = b;
  r.value = revprop::add(value(a), value(b));
  return push(std::move(r));
}

template <std::floating_point T>
auto Graph<T>::sub(Node a, Node b) -> Node {
  Record r;
  r.op = Op::sub;
  r.a = a;
  r.b = b;
  r.value = revprop::sub(value(a), value(b));
  return push(std::move(r));
}

template <std::floating_point T>
auto Graph<T>::split(Node x) -> std::pair<Node, Node> {
  auto [lo, hi] = split_channels(value(x));
  Record rl;
  rl.op = Op::split_lo;
  rl.a = x;
  rl.value = std::move(lo);
  const Node nl = push(std::move(rl));
  Record rh;
  rh.op = Op::split_hi;
  rh.a = x;
  rh.value = std::move(hi);
  const Node nh = push(std::move(rh));
  return {nl, nh};
}

template <std::floating_point T>
auto Graph<T>::concat(Node a, Node b) -> Node {
  Record r;
  r.op = Op::concat;
  r.a = a;
  r.b = b;
  r.value = concat_channels(value(a), value(b));
  return push(std::move(r));
}

template <std::floating_point T>
const Tensor<T>& Graph<T>::value(Node n) const {
  const auto& r = checked(n);
  if (r.value.empty() && r.shape.numel() != 0) {
    throw std::logic_error("graph node " + std::to_string(n) + " value was already released");
  }
  return r.value;
}

template <std::floating_point T>
Tensor<T> Graph<T>::take(Node n) {
  (void)value(n);
  return std::move(nodes_[n].value);
}

template <std::floating_point T>
void Graph<T>::add_grad(Node n, Tensor<T> g) {
  auto& r = nodes_[n];
  if (!r.has_grad) {
    r.grad = std::move(g);
    r.has_grad = true;
  } else {
    accumulate(r.grad, g);
  }
}

template <std::floating_point T>
void Graph<T>::add_grad_channels(Node n, const Tensor<T>& g, std::size_t first_channel) {
  auto& r = nodes_[n];
  if (!r.has_grad) {
    r.grad = Tensor<T>(r.shape);
    r.has_grad = true;
  }
  const std::size_t offset = first_channel * r.shape.spatial_numel();
  auto dst = r.grad.data().subspan(offset, g.size());
  auto src = g.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

template <std::floating_point T>
void Graph<T>::backward(Node root, Tensor<T> seed, const GradSink& sink) {
  const auto& rr = checked(root);
  if (seed.shape() != rr.shape) {
    throw ShapeError("backward seed shape " + seed.shape().to_string() + " does not match node " +
                     rr.shape.to_string());
  }
  add_grad(root, std::move(seed));

  for (Node i = root + 1; i-- > 0;) {
    auto& r = nodes_[i];
    if (r.op == Op::leaf) continue;
    if (r.has_grad) {
      Tensor<T> g = std::move(r.grad);
      r.has_grad = false;
      switch (r.op) {
        case Op::conv: {
          auto grads = conv3d_backward(value(r.a), *r.kernel, g);
          if (ConvKernel<T>* acc = sink ? sink(*r.kernel) : nullptr) {
            accumulate(acc->weights, grads.weights);
            accumulate(acc->bias, grads.bias);
          }
          grads.weights = Tensor<T>();
          grads.bias = Tensor<T>();
          g = Tensor<T>();
          add_grad(r.a, std::move(grads.input));
          break;
        }
        case Op::relu: {
          auto gx = relu_backward(value(r.a), g);
          g = Tensor<T>();
          add_grad(r.a, std::move(gx));
          break;
        }
        case Op::add:
          add_grad(r.a, g);
          add_grad(r.b, std::move(g));
          break;
        case Op::sub:
          add_grad(r.a, g);
          add_grad(r.b, scale(g, T{-1}));
          break;
        case Op::split_lo:
          add_grad_channels(r.a, g, 0);
          break;
        case Op::split_hi:
          add_grad_channels(r.a, g, nodes_[r.a].shape[0] / 2);
          break;
        case Op::concat: {
          const std::size_t ca = nodes_[r.a].shape[0];
          const std::size_t spatial = r.shape.spatial_numel();
          Tensor<T> ga(nodes_[r.a].shape);
          Tensor<T> gb(nodes_[r.b].shape);
          std::copy_n(g.data().begin(), ca * spatial, ga.data().begin());
          std::copy(g.data().begin() + static_cast<std::ptrdiff_t>(ca * spatial), g.data().end(),
                    gb.data().begin());
          g = Tensor<T>();
          add_grad(r.a, std::move(ga));
          add_grad(r.b, std::move(gb));
          break;
        }
        case Op::leaf:
          break;
      }
    }
    nodes_[i].value = Tensor<T>();
  }
}

template <std::floating_point T>
Tensor<T> Graph<T>::take_grad(Node leaf) {
  auto& r = nodes_.at(leaf);
  if (!r.has_grad) return Tensor<T>(r.shape);
  r.has_grad = false;
  return std::move(r.grad);
}

template class Graph<float>;
template class Graph<double>;

}  // namespace revprop
