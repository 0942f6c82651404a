#include "revprop/ops.hpp"

#include <algorithm>
#include <vector>

#include "revprop/error.hpp"

namespace revprop {

template <std::floating_point T>
ConvKernel<T>::ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t k,
                          std::size_t pad, MemoryKind kind)
    : weights(Shape{out_channels, in_channels, k, k, k}, kind),
      bias(Shape{out_channels}, kind),
      padding(pad) {}

template <std::floating_point T>
ConvKernel<T> zeros_like(const ConvKernel<T>& k, MemoryKind kind) {
  return ConvKernel<T>(k.out_channels(), k.in_channels(), k.size(), k.padding, kind);
}

namespace {

struct ConvGeometry {
  std::size_t ci, co, k, pad;
  std::size_t in[3];
  std::size_t out[3];

  // Output index range [lo, hi) along axis d whose input index o + tap - pad is in bounds.
  [[nodiscard]] std::pair<std::size_t, std::size_t> valid_range(int d, std::size_t tap) const {
    const std::size_t lo = pad > tap ? pad - tap : 0;
    const std::size_t bound = in[d] + pad > tap ? in[d] + pad - tap : 0;
    const std::size_t hi = std::min(out[d], bound);
    return {lo, std::max(lo, hi)};
  }
};

template <std::floating_point T>
ConvGeometry geometry(const Shape& input, const ConvKernel<T>& kernel) {
  const auto& ws = kernel.weights.shape();
  if (ws.rank() != 5 || ws[2] != ws[3] || ws[2] != ws[4]) {
    throw ShapeError("conv kernel weights must be (C_out, C_in, k, k, k), got " + ws.to_string());
  }
  if (kernel.bias.shape() != Shape{ws[0]}) {
    throw ShapeError("conv bias shape " + kernel.bias.shape().to_string() + " does not match " +
                     std::to_string(ws[0]) + " output channels");
  }
  if (input.rank() != 4) {
    throw ShapeError("conv3d input must be (C, X, Y, Z), got " + input.to_string());
  }
  if (input[0] != ws[1]) {
    throw ShapeError("conv3d channel mismatch: input " + input.to_string() + " vs kernel C_in " +
                     std::to_string(ws[1]));
  }
  ConvGeometry g{ws[1], ws[0], ws[2], kernel.padding, {}, {}};
  for (int d = 0; d < 3; ++d) {
    g.in[d] = input[static_cast<std::size_t>(d) + 1];
    const auto padded = g.in[d] + 2 * g.pad;
    if (padded < g.k) {
      throw ShapeError("conv3d output extent would be non-positive for input " + input.to_string() +
                       " and kernel size " + std::to_string(g.k));
    }
    g.out[d] = padded - g.k + 1;
  }
  return g;
}

}  // namespace

template <std::floating_point T>
Shape conv3d_output_shape(const Shape& input, const ConvKernel<T>& kernel) {
  const auto g = geometry(input, kernel);
  return Shape{g.co, g.out[0], g.out[1], g.out[2]};
}

namespace {

// Column matrix of the convolution: row (ci, a, b, c) holds, for every output
// voxel p, the input value under tap (a, b, c) of channel ci (zero where the
// tap falls in the padding). Transient workspace, not charged to the ledger.
template <std::floating_point T>
void im2col(const T* x, const ConvGeometry& g, std::vector<T>& col) {
  const std::size_t in_plane = g.in[1] * g.in[2];
  const std::size_t in_vol = g.in[0] * in_plane;
  const std::size_t out_plane = g.out[1] * g.out[2];
  const std::size_t out_vol = g.out[0] * out_plane;
  const std::size_t n = g.ci * g.k * g.k * g.k * out_vol;
  if (col.size() < n) col.resize(n);
  if (g.pad > 0) std::fill(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(n), T{0});
  T* row = col.data();
  for (std::size_t ci = 0; ci < g.ci; ++ci) {
    const T* xc = x + ci * in_vol;
    for (std::size_t a = 0; a < g.k; ++a) {
      const auto [x0, x1] = g.valid_range(0, a);
      for (std::size_t b = 0; b < g.k; ++b) {
        const auto [y0, y1] = g.valid_range(1, b);
        for (std::size_t c = 0; c < g.k; ++c, row += out_vol) {
          const auto [z0, z1] = g.valid_range(2, c);
          for (std::size_t ox = x0; ox < x1; ++ox) {
            for (std::size_t oy = y0; oy < y1; ++oy) {
              const T* src = xc + (ox + a - g.pad) * in_plane + (oy + b - g.pad) * g.in[2] + c - g.pad;
              T* dst = row + ox * out_plane + oy * g.out[2];
              for (std::size_t oz = z0; oz < z1; ++oz) dst[oz] = src[oz];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds column rows back onto the input grid.
template <std::floating_point T>
void col2im_add(const T* col, const ConvGeometry& g, T* gx) {
  const std::size_t in_plane = g.in[1] * g.in[2];
  const std::size_t in_vol = g.in[0] * in_plane;
  const std::size_t out_plane = g.out[1] * g.out[2];
  const std::size_t out_vol = g.out[0] * out_plane;
  const T* row = col;
  for (std::size_t ci = 0; ci < g.ci; ++ci) {
    T* gc = gx + ci * in_vol;
    for (std::size_t a = 0; a < g.k; ++a) {
      const auto [x0, x1] = g.valid_range(0, a);
      for (std::size_t b = 0; b < g.k; ++b) {
        const auto [y0, y1] = g.valid_range(1, b);
        for (std::size_t c = 0; c < g.k; ++c, row += out_vol) {
          const auto [z0, z1] = g.valid_range(2, c);
          for (std::size_t ox = x0; ox < x1; ++ox) {
            for (std::size_t oy = y0; oy < y1; ++oy) {
              T* dst = gc + (ox + a - g.pad) * in_plane + (oy + b - g.pad) * g.in[2] + c - g.pad;
              const T* src = row + ox * out_plane + oy * g.out[2];
              for (std::size_t oz = z0; oz < z1; ++oz) dst[oz] += src[oz];
            }
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.k == 1 && g.pad == 0; }

template <std::floating_point T>
std::vector<T>& workspace_buffer(int slot) {
  thread_local std::vector<T> buffers[2];
  return buffers[slot];
}

// y[p] += a[0] x[0][p] + a[1] x[1][p] + ..., added left to right, so the
// result equals that many separate axpy passes.
template <std::floating_point T>
void axpy_rows(T* y, const T* a, const T* const* x, std::size_t rows, std::size_t n) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const T a0 = a[r], a1 = a[r + 1], a2 = a[r + 2], a3 = a[r + 3];
    const T *x0 = x[r], *x1 = x[r + 1], *x2 = x[r + 2], *x3 = x[r + 3];
    for (std::size_t p = 0; p < n; ++p) y[p] = (((y[p] + a0 * x0[p]) + a1 * x1[p]) + a2 * x2[p]) + a3 * x3[p];
  }
  for (; r < rows; ++r) {
    const T ar = a[r];
    const T* xr = x[r];
    for (std::size_t p = 0; p < n; ++p) y[p] += ar * xr[p];
  }
}

// Four sequential dot products sharing one operand.
template <std::floating_point T>
void dot4(const T* g, const T* c0, const T* c1, const T* c2, const T* c3, std::size_t n, T* out) {
  T d0{0}, d1{0}, d2{0}, d3{0};
  for (std::size_t p = 0; p < n; ++p) {
    d0 += g[p] * c0[p];
    d1 += g[p] * c1[p];
    d2 += g[p] * c2[p];
    d3 += g[p] * c3[p];
  }
  out[0] = d0;
  out[1] = d1;
  out[2] = d2;
  out[3] = d3;
}

}  // namespace

template <std::floating_point T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const ConvKernel<T>& kernel) {
  const auto g = geometry(x.shape(), kernel);
  current_ledger()->count_forward_op();

  Tensor<T> out(Shape{g.co, g.out[0], g.out[1], g.out[2]});
  const std::size_t out_vol = g.out[0] * g.out[1] * g.out[2];
  const std::size_t rows = g.ci * g.k * g.k * g.k;
  const T* col = x.data().data();
  if (!is_pointwise(g)) {
    auto& ws = workspace_buffer<T>(0);
    im2col(x.data().data(), g, ws);
    col = ws.data();
  }
  std::vector<const T*> col_rows(rows);
  for (std::size_t j = 0; j < rows; ++j) col_rows[j] = col + j * out_vol;
  const T* w = kernel.weights.data().data();
  T* o = out.data().data();
  for (std::size_t co = 0; co < g.co; ++co) {
    T* oc = o + co * out_vol;
    std::fill(oc, oc + out_vol, kernel.bias[co]);
    axpy_rows(oc, w + co * rows, col_rows.data(), rows, out_vol);
  }
  return out;
}

template <std::floating_point T>
ConvGrads<T> conv3d_backward(const Tensor<T>& x, const ConvKernel<T>& kernel,
                             const Tensor<T>& grad_out) {
  const auto g = geometry(x.shape(), kernel);
  const Shape expected{g.co, g.out[0], g.out[1], g.out[2]};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv3d_backward grad_out shape " + grad_out.shape().to_string() +
                     " does not match forward output " + expected.to_string());
  }
  current_ledger()->count_backward_op();

  ConvGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(kernel.weights.shape(), MemoryKind::parameter),
                     Tensor<T>(kernel.bias.shape(), MemoryKind::parameter)};
  const std::size_t out_vol = g.out[0] * g.out[1] * g.out[2];
  const std::size_t rows = g.ci * g.k * g.k * g.k;
  const bool pointwise = is_pointwise(g);
  const T* col = x.data().data();
  if (!pointwise) {
    auto& ws = workspace_buffer<T>(0);
    im2col(x.data().data(), g, ws);
    col = ws.data();
  }
  const T* w = kernel.weights.data().data();
  const T* go = grad_out.data().data();
  T* gw = grads.weights.data().data();

  for (std::size_t co = 0; co < g.co; ++co) {
    const T* goc = go + co * out_vol;
    T acc{0};
    for (std::size_t p = 0; p < out_vol; ++p) acc += goc[p];
    grads.bias[co] = acc;
    std::size_t j = 0;
    for (; j + 4 <= rows; j += 4) {
      const T* cj = col + j * out_vol;
      dot4(goc, cj, cj + out_vol, cj + 2 * out_vol, cj + 3 * out_vol, out_vol, gw + co * rows + j);
    }
    for (; j < rows; ++j) {
      const T* cj = col + j * out_vol;
      T dot{0};
      for (std::size_t p = 0; p < out_vol; ++p) dot += goc[p] * cj[p];
      gw[co * rows + j] = dot;
    }
  }

  // Column-space input gradient; for pointwise kernels this is the input grid itself.
  T* gcol = grads.input.data().data();
  if (!pointwise) {
    auto& gs = workspace_buffer<T>(1);
    if (gs.size() < rows * out_vol) gs.resize(rows * out_vol);
    std::fill(gs.begin(), gs.begin() + static_cast<std::ptrdiff_t>(rows * out_vol), T{0});
    gcol = gs.data();
  }
  std::vector<const T*> go_rows(g.co);
  for (std::size_t co = 0; co < g.co; ++co) go_rows[co] = go + co * out_vol;
  std::vector<T> wcol(g.co);
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t co = 0; co < g.co; ++co) wcol[co] = w[co * rows + j];
    axpy_rows(gcol + j * out_vol, wcol.data(), go_rows.data(), g.co, out_vol);
  }
  if (!pointwise) col2im_add(gcol, g, grads.input.data().data());
  return grads;
}

template <std::floating_point T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto o = out.data();
  auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T{0} ? in[i] : T{0};
  return out;
}

template <std::floating_point T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  if (x.shape() != grad_out.shape()) {
    throw ShapeError("relu_backward shape mismatch: " + x.shape().to_string() + " vs " +
                     grad_out.shape().to_string());
  }
  Tensor<T> out(x.shape());
  auto o = out.data();
  auto in = x.data();
  auto go = grad_out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > T{0} ? go[i] : T{0};
  return out;
}

namespace {

// Visits every (low-res source offset, high-res destination offset) pair.
template <typename F>
void for_each_shuffle_pair(std::size_t channels, const std::size_t lo[3], std::size_t r, F&& f) {
  const std::size_t r3 = r * r * r;
  const std::size_t hi[3] = {lo[0] * r, lo[1] * r, lo[2] * r};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t x = 0; x < hi[0]; ++x) {
      for (std::size_t y = 0; y < hi[1]; ++y) {
        for (std::size_t z = 0; z < hi[2]; ++z) {
          const std::size_t src_c = c * r3 + (x % r) * r * r + (y % r) * r + z % r;
          const std::size_t src = ((src_c * lo[0] + x / r) * lo[1] + y / r) * lo[2] + z / r;
          const std::size_t dst = ((c * hi[0] + x) * hi[1] + y) * hi[2] + z;
          f(src, dst);
        }
      }
    }
  }
}

}  // namespace

template <std::floating_point T>
Tensor<T> shuffle(const Tensor<T>& x, std::size_t r) {
  const auto& s = x.shape();
  if (r == 0) throw ShapeError("upsampling rate must be positive");
  const std::size_t r3 = r * r * r;
  if (s.rank() != 4 || s[0] % r3 != 0) {
    throw ShapeError("shuffle needs a channel extent divisible by r^3 = " + std::to_string(r3) +
                     ", got " + s.to_string());
  }
  const std::size_t lo[3] = {s[1], s[2], s[3]};
  const std::size_t channels = s[0] / r3;
  Tensor<T> out(Shape{channels, lo[0] * r, lo[1] * r, lo[2] * r});
  auto in = x.data();
  auto o = out.data();
  for_each_shuffle_pair(channels, lo, r, [&](std::size_t src, std::size_t dst) { o[dst] = in[src]; });
  return out;
}

template <std::floating_point T>
Tensor<T> inverse_shuffle(const Tensor<T>& y, std::size_t r) {
  const auto& s = y.shape();
  if (r == 0) throw ShapeError("upsampling rate must be positive");
  if (s.rank() != 4 || s[1] % r != 0 || s[2] % r != 0 || s[3] % r != 0) {
    throw ShapeError("inverse_shuffle needs spatial extents divisible by r = " + std::to_string(r) +
                     ", got " + s.to_string());
  }
  const std::size_t lo[3] = {s[1] / r, s[2] / r, s[3] / r};
  Tensor<T> out(Shape{s[0] * r * r * r, lo[0], lo[1], lo[2]});
  auto in = y.data();
  auto o = out.data();
  for_each_shuffle_pair(s[0], lo, r, [&](std::size_t src, std::size_t dst) { o[src] = in[dst]; });
  return out;
}

#define REVPROP_INSTANTIATE(T)                                                              \
  template struct ConvKernel<T>;                                                            \
  template ConvKernel<T> zeros_like(const ConvKernel<T>&, MemoryKind);                      \
  template Shape conv3d_output_shape(const Shape&, const ConvKernel<T>&);                   \
  template Tensor<T> conv3d_forward(const Tensor<T>&, const ConvKernel<T>&);                \
  template ConvGrads<T> conv3d_backward(const Tensor<T>&, const ConvKernel<T>&,             \
                                        const Tensor<T>&);                                  \
  template Tensor<T> relu_forward(const Tensor<T>&);                                        \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> shuffle(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> inverse_shuffle(const Tensor<T>&, std::size_t);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
