#include "revprop/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "revprop/error.hpp"

namespace revprop {

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << ',';
    os << dims_[i];
  }
  os << ')';
  return os.str();
}

template <std::floating_point T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, MemoryKind kind)
    : shape_(std::move(shape)), data_(std::move(data)), kind_(kind) {
  if (shape_.numel() != data_.size()) {
    throw ShapeError("tensor shape " + shape_.to_string() + " holds " +
                     std::to_string(shape_.numel()) + " elements but " +
                     std::to_string(data_.size()) + " were given");
  }
  charge();
}

template <std::floating_point T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape mismatch: " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
  Tensor<T> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  if (op == ElementwiseOp::add) {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  } else {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  }
  return out;
}

template <std::floating_point T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * factor;
  return out;
}

template <std::floating_point T>
void accumulate(Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape mismatch: " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
  auto o = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
}

template <std::floating_point T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x) {
  const auto& d = x.shape().dims();
  if (d.empty() || d[0] % 2 != 0) {
    throw ShapeError("split_channels needs an even channel extent, got " + x.shape().to_string());
  }
  auto half = d;
  half[0] /= 2;
  Shape hs(half);
  const std::size_t n = hs.numel();
  Tensor<T> lo(hs);
  Tensor<T> hi(hs);
  std::copy_n(x.data().begin(), n, lo.data().begin());
  std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(n), n, hi.data().begin());
  return {std::move(lo), std::move(hi)};
}

template <std::floating_point T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& da = a.shape().dims();
  const auto& db = b.shape().dims();
  if (da.empty() || da.size() != db.size() || !std::equal(da.begin() + 1, da.end(), db.begin() + 1)) {
    throw ShapeError("concat_channels spatial mismatch: " + a.shape().to_string() + " vs " +
                     b.shape().to_string());
  }
  auto dims = da;
  dims[0] += db[0];
  Tensor<T> out{Shape(dims)};
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

template <std::floating_point T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape mismatch: " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <std::floating_point T>
double max_abs(const Tensor<T>& a) {
  double m = 0.0;
  for (auto v : a.data()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <std::floating_point T>
double relative_error(const Tensor<T>& a, const Tensor<T>& reference) {
  const double diff = max_abs_diff(a, reference);
  const double ref = max_abs(reference);
  if (ref == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / ref;
}

template <std::floating_point T>
bool all_finite(const Tensor<T>& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](T v) { return std::isfinite(v); });
}

template <std::floating_point T>
bool identical(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0);
}

#define REVPROP_INSTANTIATE(T)                                                           \
  template class Tensor<T>;                                                              \
  template Tensor<T> elementwise(ElementwiseOp, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> scale(const Tensor<T>&, T);                                         \
  template void accumulate(Tensor<T>&, const Tensor<T>&);                                \
  template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&);             \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                \
  template double max_abs_diff(const Tensor<T>&, const Tensor<T>&);                      \
  template double max_abs(const Tensor<T>&);                                             \
  template double relative_error(const Tensor<T>&, const Tensor<T>&);                    \
  template bool all_finite(const Tensor<T>&);                                            \
  template bool identical(const Tensor<T>&, const Tensor<T>&);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
