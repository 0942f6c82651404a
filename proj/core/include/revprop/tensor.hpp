#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "revprop/ledger.hpp"

namespace revprop {

/// Extents of a dense tensor. Volumetric tensors are (C, X, Y, Z), row-major.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

  [[nodiscard]] std::size_t rank() const noexcept { return dims_.size(); }
  [[nodiscard]] std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  [[nodiscard]] const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  [[nodiscard]] std::size_t numel() const noexcept {
    if (dims_.empty()) return 0;
    std::size_t n = 1;
    for (auto d : dims_) n *= d;
    return n;
  }

  /// Product of all extents after the leading (channel) one.
  [[nodiscard]] std::size_t spatial_numel() const noexcept {
    std::size_t n = 1;
    for (std::size_t i = 1; i < dims_.size(); ++i) n *= dims_[i];
    return n;
  }

  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Dense floating-point tensor with value semantics.
///
/// Every tensor charges its element count to the ledger that was current on
/// the constructing thread, and releases it on destruction. Copies register
/// anew; moves transfer the charge.
template <std::floating_point T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, MemoryKind kind = MemoryKind::activation)
      : shape_(std::move(shape)), data_(shape_.numel(), T{0}), kind_(kind) {
    charge();
  }

  Tensor(Shape shape, std::vector<T> data, MemoryKind kind = MemoryKind::activation);

  static Tensor full(Shape shape, T value, MemoryKind kind = MemoryKind::activation) {
    Tensor t(std::move(shape), kind);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor zeros_like(const Tensor& other, MemoryKind kind = MemoryKind::activation) {
    return Tensor(other.shape(), kind);
  }

  Tensor(const Tensor& other) : shape_(other.shape_), data_(other.data_), kind_(other.kind_) {
    charge();
  }

  Tensor(Tensor&& other) noexcept
      : shape_(std::move(other.shape_)),
        data_(std::move(other.data_)),
        kind_(other.kind_),
        ledger_(std::move(other.ledger_)) {
    other.shape_ = Shape{};
    other.data_.clear();
  }

  Tensor& operator=(const Tensor& other) {
    if (this != &other) {
      Tensor copy(other);
      *this = std::move(copy);
    }
    return *this;
  }

  Tensor& operator=(Tensor&& other) noexcept {
    if (this != &other) {
      discharge();
      shape_ = std::move(other.shape_);
      data_ = std::move(other.data_);
      kind_ = other.kind_;
      ledger_ = std::move(other.ledger_);
      other.shape_ = Shape{};
      other.data_.clear();
    }
    return *this;
  }

  ~Tensor() { discharge(); }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] MemoryKind kind() const noexcept { return kind_; }

  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
  [[nodiscard]] std::span<T> data() noexcept { return data_; }

  [[nodiscard]] T operator[](std::size_t i) const { return data_[i]; }
  [[nodiscard]] T& operator[](std::size_t i) { return data_[i]; }

  /// Element of a rank-4 (C, X, Y, Z) tensor.
  [[nodiscard]] T at(std::size_t c, std::size_t x, std::size_t y, std::size_t z) const {
    return data_[offset(c, x, y, z)];
  }
  [[nodiscard]] T& at(std::size_t c, std::size_t x, std::size_t y, std::size_t z) {
    return data_[offset(c, x, y, z)];
  }

  [[nodiscard]] std::size_t offset(std::size_t c, std::size_t x, std::size_t y,
                                   std::size_t z) const {
    const auto& d = shape_.dims();
    return ((c * d[1] + x) * d[2] + y) * d[3] + z;
  }

  /// Moves the element charge to a different memory kind.
  void set_kind(MemoryKind kind) {
    if (kind == kind_) return;
    discharge();
    kind_ = kind;
    charge();
  }

 private:
  void charge() {
    if (data_.empty()) return;
    ledger_ = current_ledger();
    ledger_->allocate(kind_, static_cast<std::int64_t>(data_.size()));
  }

  void discharge() noexcept {
    if (ledger_) {
      ledger_->release(kind_, static_cast<std::int64_t>(data_.size()));
      ledger_.reset();
    }
  }

  Shape shape_;
  std::vector<T> data_;
  MemoryKind kind_ = MemoryKind::activation;
  std::shared_ptr<Ledger> ledger_;
};

/// Converts between precisions (or copies, for T == U).
template <std::floating_point To, std::floating_point From>
Tensor<To> cast(const Tensor<From>& src, MemoryKind kind = MemoryKind::activation) {
  Tensor<To> out(src.shape(), kind);
  std::transform(src.data().begin(), src.data().end(), out.data().begin(),
                 [](From v) { return static_cast<To>(v); });
  return out;
}

enum class ElementwiseOp { add, sub };

template <std::floating_point T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b);

template <std::floating_point T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <std::floating_point T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(ElementwiseOp::add, a, b);
}

template <std::floating_point T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(ElementwiseOp::sub, a, b);
}

/// a += b, in place.
template <std::floating_point T>
void accumulate(Tensor<T>& a, const Tensor<T>& b);

/// Splits (2c, ...) into the leading and trailing c channels.
template <std::floating_point T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x);

/// Stacks a's channels in front of b's.
template <std::floating_point T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// max_i |a_i - b_i|
template <std::floating_point T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

/// max_i |a_i|
template <std::floating_point T>
double max_abs(const Tensor<T>& a);

/// max|a - reference| / max|reference|; 0 when both are all-zero.
template <std::floating_point T>
double relative_error(const Tensor<T>& a, const Tensor<T>& reference);

template <std::floating_point T>
bool all_finite(const Tensor<T>& a);

/// Bitwise equality of shape and every element.
template <std::floating_point T>
bool identical(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace revprop
