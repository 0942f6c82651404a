#include "revprop/volume_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "binary_io.hpp"

namespace revprop {

using detail::read_le;
using detail::write_le;

void write_volume(std::ostream& os, const Volume& v, Precision precision) {
  v.validate();
  detail::write_magic(os, "RVOL");
  write_le<std::uint32_t>(os, kVolumeFormatVersion);
  write_le<std::uint8_t>(os, precision == Precision::f32 ? 0 : 1);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.channels()));
  for (auto e : v.extents()) write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  const auto d = v.data.data();
  if (precision == Precision::f64) {
    detail::write_array(os, d.data(), d.size());
  } else {
    std::vector<float> f(d.begin(), d.end());
    detail::write_array(os, f.data(), f.size());
  }
  std::vector<std::uint8_t> bits((v.mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < v.mask.size(); ++i) {
    if (v.mask[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  detail::write_array(os, bits.data(), bits.size());
}

Volume read_volume(std::istream& is) {
  detail::expect_magic(is, "RVOL");
  const auto version = read_le<std::uint32_t>(is, "version");
  if (version != kVolumeFormatVersion) {
    throw FormatError("unsupported volume format version " + std::to_string(version));
  }
  const auto prec = read_le<std::uint8_t>(is, "precision");
  if (prec > 1) throw FormatError("unknown precision flag " + std::to_string(prec));
  const auto channels = read_le<std::uint32_t>(is, "channels");
  Index3 ext{};
  for (auto& e : ext) e = read_le<std::uint32_t>(is, "extent");
  if (channels == 0 || channels > 4096 || ext[0] == 0 || ext[1] == 0 || ext[2] == 0 ||
      ext[0] * ext[1] * ext[2] > (std::size_t{1} << 31)) {
    throw FormatError("implausible volume header");
  }
  Volume v(channels, ext);
  auto d = v.data.data();
  if (prec == 1) {
    detail::read_array(is, d.data(), d.size(), "volume values");
  } else {
    std::vector<float> f(d.size());
    detail::read_array(is, f.data(), f.size(), "volume values");
    std::copy(f.begin(), f.end(), d.begin());
  }
  std::vector<std::uint8_t> bits((v.mask.size() + 7) / 8);
  detail::read_array(is, bits.data(), bits.size(), "mask");
  for (std::size_t i = 0; i < v.mask.size(); ++i) v.mask[i] = (bits[i / 8] >> (i % 8)) & 1u;
  return v;
}

void save_volume(const std::filesystem::path& path, const Volume& v, Precision precision) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_volume(os, v, precision);
  os.flush();
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open volume " + path.string());
  return read_volume(is);
}

}  // namespace revprop
