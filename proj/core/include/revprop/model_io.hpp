#pragma once

#include <concepts>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "revprop/network.hpp"

namespace revprop {

/// Model file layout (little-endian):
///   "RVPM", u32 version,
///   spec: u32 C, u32 r, u32 N, u8 precision (0 = 32-bit, 1 = 64-bit), u32 layer count,
///         per layer u32 kernel, u32 out_channels, u32 padding, u8 relu,
///   u32 entry count, then per weight/bias tensor in registry order:
///         u32 name length, name bytes ("layer1.weight", "stack1.block1.f1.core.bias"),
///         u32 rank, rank x u32 extents, raw values in the stored precision.
inline constexpr std::uint32_t kModelFormatVersion = 1;

template <std::floating_point T>
struct LoadedModel {
  NetworkSpec spec;
  NetworkParams<T> params;
};

/// The stored precision follows T; the spec's precision field is rewritten to match.
template <std::floating_point T>
void write_model(std::ostream& os, const NetworkSpec& spec, const NetworkParams<T>& params);

template <std::floating_point T>
void save_model(const std::filesystem::path& path, const NetworkSpec& spec, const NetworkParams<T>& params);

/// Throws FormatError on malformed input or when the stored precision is not T.
template <std::floating_point T>
LoadedModel<T> read_model(std::istream& is);

template <std::floating_point T>
LoadedModel<T> load_model(const std::filesystem::path& path);

/// Reads only the header, e.g. to pick the precision before loading.
NetworkSpec read_model_spec(const std::filesystem::path& path);

void write_spec(std::ostream& os, const NetworkSpec& spec);
NetworkSpec read_spec(std::istream& is);

}  // namespace revprop
