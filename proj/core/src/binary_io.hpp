#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "revprop/error.hpp"

namespace revprop::detail {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

template <class V>
  requires std::is_arithmetic_v<V>
void write_le(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
  requires std::is_arithmetic_v<V>
V read_le(std::istream& is, const char* what) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return v;
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4] = {};
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

template <class V>
void write_array(std::ostream& os, const V* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(V)));
}

template <class V>
void read_array(std::istream& is, V* data, std::size_t n, const char* what) {
  if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(V)))) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
}

}  // namespace revprop::detail
