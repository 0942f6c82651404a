#include "revprop/reversible.hpp"

#include <string>
#include <utility>

#include "revprop/error.hpp"

namespace revprop {

template <std::floating_point T>
Bottleneck<T>::Bottleneck(std::size_t channels, MemoryKind kind)
    : reduce(mid_channels(channels), channels, 1, 0, kind),
      core(mid_channels(channels), mid_channels(channels), 3, 1, kind),
      expand(channels, mid_channels(channels), 1, 0, kind) {}

template <std::floating_point T>
Bottleneck<T> zeros_like(const Bottleneck<T>& b, MemoryKind kind) {
  Bottleneck<T> out;
  out.reduce = zeros_like(b.reduce, kind);
  out.core = zeros_like(b.core, kind);
  out.expand = zeros_like(b.expand, kind);
  return out;
}

template <std::floating_point T>
Tensor<T> bottleneck_forward(const Bottleneck<T>& fn, const Tensor<T>& x) {
  auto h = relu_forward(conv3d_forward(x, fn.reduce));
  h = relu_forward(conv3d_forward(h, fn.core));
  return conv3d_forward(h, fn.expand);
}

template <std::floating_point T>
typename Graph<T>::Node record_bottleneck(Graph<T>& g, typename Graph<T>::Node x,
                                          const Bottleneck<T>& fn) {
  auto n = g.relu(g.conv(x, fn.reduce));
  n = g.relu(g.conv(n, fn.core));
  return g.conv(n, fn.expand);
}

template <std::floating_point T>
RevNetBlock<T>::RevNetBlock(std::size_t width, MemoryKind kind) {
  if (width == 0 || width % 2 != 0) {
    throw ConfigError("RevNet block width must be even and positive, got " + std::to_string(width));
  }
  f1 = Bottleneck<T>(width / 2, kind);
  f2 = Bottleneck<T>(width / 2, kind);
}

template <std::floating_point T>
RevNetBlock<T> zeros_like(const RevNetBlock<T>& b, MemoryKind kind) {
  RevNetBlock<T> out;
  out.f1 = zeros_like(b.f1, kind);
  out.f2 = zeros_like(b.f2, kind);
  return out;
}

namespace {

template <std::floating_point T>
void check_width(const RevNetBlock<T>& block, const Tensor<T>& t, const char* what) {
  if (t.shape().rank() != 4 || t.shape()[0] != block.width()) {
    throw ShapeError(std::string(what) + " expects " + std::to_string(block.width()) +
                     " channels, got " + t.shape().to_string());
  }
}

template <std::floating_point T>
typename Graph<T>::GradSink bottleneck_sink(const Bottleneck<T>& fn, Bottleneck<T>* grads) {
  if (!grads) return {};
  return [&fn, grads](const ConvKernel<T>& k) -> ConvKernel<T>* {
    if (&k == &fn.reduce) return &grads->reduce;
    if (&k == &fn.core) return &grads->core;
    if (&k == &fn.expand) return &grads->expand;
    return nullptr;
  };
}

}  // namespace

template <std::floating_point T>
Tensor<T> revnet_forward(const RevNetBlock<T>& block, const Tensor<T>& x) {
  check_width(block, x, "revnet_forward");
  auto [xa, xb] = split_channels(x);
  auto z = add(xa, bottleneck_forward(block.f1, xb));
  xa = Tensor<T>();
  auto yb = add(xb, bottleneck_forward(block.f2, z));
  xb = Tensor<T>();
  return concat_channels(z, yb);
}

template <std::floating_point T>
Tensor<T> revnet_invert(const RevNetBlock<T>& block, const Tensor<T>& y) {
  check_width(block, y, "revnet_invert");
  auto [z, yb] = split_channels(y);
  auto xb = sub(yb, bottleneck_forward(block.f2, z));
  yb = Tensor<T>();
  auto xa = sub(z, bottleneck_forward(block.f1, xb));
  z = Tensor<T>();
  return concat_channels(xa, xb);
}

template <std::floating_point T>
RevNetBackward<T> revnet_backward(const RevNetBlock<T>& block, Tensor<T> y, Tensor<T> grad_y,
                                  std::type_identity_t<RevNetBlock<T>>* grad_params) {
  check_width(block, y, "revnet_backward");
  if (grad_y.shape() != y.shape()) {
    throw ShapeError("revnet_backward grad shape " + grad_y.shape().to_string() +
                     " does not match activation " + y.shape().to_string());
  }
  auto [z, yb] = split_channels(y);
  y = Tensor<T>();
  auto [gz, gyb] = split_channels(grad_y);
  grad_y = Tensor<T>();

  // Replay F2(z): recovers x_b and adds F2's contribution to dL/dz.
  Tensor<T> xb;
  {
    Graph<T> g;
    const auto zn = g.leaf(std::move(z));
    const auto out = record_bottleneck(g, zn, block.f2);
    xb = sub(yb, g.value(out));
    yb = Tensor<T>();
    g.backward(out, gyb, bottleneck_sink(block.f2, grad_params ? &grad_params->f2 : nullptr));
    accumulate(gz, g.take_grad(zn));
    z = g.take(zn);
  }

  // Replay F1(x_b): recovers x_a and adds F1's contribution to dL/dx_b.
  Tensor<T> xa;
  {
    Graph<T> g;
    const auto xbn = g.leaf(std::move(xb));
    const auto out = record_bottleneck(g, xbn, block.f1);
    xa = sub(z, g.value(out));
    z = Tensor<T>();
    g.backward(out, gz, bottleneck_sink(block.f1, grad_params ? &grad_params->f1 : nullptr));
    accumulate(gyb, g.take_grad(xbn));
    xb = g.take(xbn);
  }

  RevNetBackward<T> result;
  result.x = concat_channels(xa, xb);
  xa = Tensor<T>();
  xb = Tensor<T>();
  result.grad_x = concat_channels(gz, gyb);
  return result;
}

template <std::floating_point T>
typename Graph<T>::Node record_revnet(Graph<T>& g, typename Graph<T>::Node x,
                                      const RevNetBlock<T>& block) {
  check_width(block, g.value(x), "record_revnet");
  const auto [xa, xb] = g.split(x);
  const auto z = g.add(xa, record_bottleneck(g, xb, block.f1));
  const auto yb = g.add(xb, record_bottleneck(g, z, block.f2));
  return g.concat(z, yb);
}

#define REVPROP_INSTANTIATE(T)                                                                  \
  template struct Bottleneck<T>;                                                                \
  template struct RevNetBlock<T>;                                                               \
  template Bottleneck<T> zeros_like(const Bottleneck<T>&, MemoryKind);                          \
  template RevNetBlock<T> zeros_like(const RevNetBlock<T>&, MemoryKind);                        \
  template Tensor<T> bottleneck_forward(const Bottleneck<T>&, const Tensor<T>&);                \
  template Graph<T>::Node record_bottleneck(Graph<T>&, Graph<T>::Node, const Bottleneck<T>&);   \
  template Tensor<T> revnet_forward(const RevNetBlock<T>&, const Tensor<T>&);                   \
  template Tensor<T> revnet_invert(const RevNetBlock<T>&, const Tensor<T>&);                    \
  template RevNetBackward<T> revnet_backward(const RevNetBlock<T>&, Tensor<T>, Tensor<T>,       \
                                             RevNetBlock<T>*);                                  \
  template Graph<T>::Node record_revnet(Graph<T>&, Graph<T>::Node, const RevNetBlock<T>&);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
