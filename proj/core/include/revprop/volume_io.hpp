#pragma once

#include <filesystem>
#include <iosfwd>

#include "revprop/data.hpp"
#include "revprop/network.hpp"

namespace revprop {

/// Volume file layout (little-endian):
///   "RVOL", u32 version, u8 precision (0 = 32-bit, 1 = 64-bit), u32 channels,
///   3 x u32 extents, C*X*Y*Z values, then the mask as ceil(XYZ / 8) bytes of
///   packed bits, least significant bit first.
inline constexpr std::uint32_t kVolumeFormatVersion = 1;

void write_volume(std::ostream& os, const Volume& v, Precision precision = Precision::f64);
Volume read_volume(std::istream& is);

void save_volume(const std::filesystem::path& path, const Volume& v, Precision precision = Precision::f64);
Volume load_volume(const std::filesystem::path& path);

}  // namespace revprop
