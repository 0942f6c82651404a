#pragma once

#include <stdexcept>
#include <string>

namespace revprop {

/// Tensor extents do not satisfy an operator's precondition.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A network description or run configuration is inconsistent.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A persisted file is truncated, has the wrong magic, or an unknown version.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data cannot support the requested operation (too few valid patch
/// positions, a constant channel, an all-zero paired difference).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace revprop
