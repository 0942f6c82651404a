#include "revprop/data.hpp"

#include <cmath>

#include "revprop/ops.hpp"

namespace revprop {

Volume::Volume(std::size_t channels, Index3 extents)
    : data(Shape{channels, extents[0], extents[1], extents[2]}, MemoryKind::untracked),
      mask(extents[0] * extents[1] * extents[2], 0) {}

std::size_t Volume::mask_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void Volume::validate() const {
  if (data.shape().rank() != 4) throw ShapeError("volume data must be (C, X, Y, Z)");
  if (mask.size() != data.shape().spatial_numel()) {
    throw ShapeError("mask has " + std::to_string(mask.size()) + " voxels, data has " +
                     std::to_string(data.shape().spatial_numel()));
  }
}

Volume generate_synthetic_subject(std::uint64_t seed, const SyntheticConfig& config) {
  const std::size_t e = config.extent;
  if (e < 16) throw ConfigError("synthetic grid extent must be at least 16");
  if (config.channels == 0) throw ConfigError("synthetic volume needs at least one channel");
  Volume v(config.channels, {e, e, e});
  std::mt19937_64 rng(seed);
  const double ed = static_cast<double>(e);
  std::uniform_real_distribution<double> centre(0.0, ed - 1.0);
  std::uniform_real_distribution<double> width(0.06 * ed, 0.15 * ed);
  std::uniform_real_distribution<double> amplitude(0.5, 1.5);
  std::bernoulli_distribution negative(0.3);

  std::vector<double> gx(e), gy(e), gz(e);
  auto d = v.data.data();
  for (std::size_t c = 0; c < config.channels; ++c) {
    double* out = d.data() + c * e * e * e;
    for (std::size_t b = 0; b < config.bumps_per_channel; ++b) {
      const double cx = centre(rng), cy = centre(rng), cz = centre(rng);
      const double s = width(rng);
      const double a = amplitude(rng) * (negative(rng) ? -1.0 : 1.0);
      const double inv = 1.0 / (2.0 * s * s);
      for (std::size_t i = 0; i < e; ++i) {
        const double di = static_cast<double>(i);
        gx[i] = std::exp(-(di - cx) * (di - cx) * inv);
        gy[i] = std::exp(-(di - cy) * (di - cy) * inv);
        gz[i] = std::exp(-(di - cz) * (di - cz) * inv);
      }
      for (std::size_t x = 0; x < e; ++x) {
        for (std::size_t y = 0; y < e; ++y) {
          const double axy = a * gx[x] * gy[y];
          double* row = out + (x * e + y) * e;
          for (std::size_t z = 0; z < e; ++z) row[z] += axy * gz[z];
        }
      }
    }
  }

  std::uniform_real_distribution<double> semi(0.28 * ed, 0.40 * ed);
  const double ax = semi(rng), ay = semi(rng), az = semi(rng);
  const double mid = (ed - 1.0) / 2.0;
  for (std::size_t x = 0; x < e; ++x) {
    for (std::size_t y = 0; y < e; ++y) {
      for (std::size_t z = 0; z < e; ++z) {
        const double px = (static_cast<double>(x) - mid) / ax;
        const double py = (static_cast<double>(y) - mid) / ay;
        const double pz = (static_cast<double>(z) - mid) / az;
        v.mask[v.voxel(x, y, z)] = px * px + py * py + pz * pz <= 1.0 ? 1 : 0;
      }
    }
  }
  return v;
}

Volume downsample_blockmean(const Volume& v, std::size_t r) {
  v.validate();
  if (r == 0) throw ConfigError("downsampling rate must be positive");
  const auto ext = v.extents();
  for (std::size_t a = 0; a < 3; ++a) {
    if (ext[a] % r != 0) {
      throw ShapeError("extent " + std::to_string(ext[a]) + " on axis " + std::to_string(a) +
                       " is not divisible by " + std::to_string(r));
    }
  }
  const Index3 lo{ext[0] / r, ext[1] / r, ext[2] / r};
  Volume out(v.channels(), lo);
  const double inv = 1.0 / static_cast<double>(r * r * r);
  for (std::size_t c = 0; c < v.channels(); ++c) {
    for (std::size_t x = 0; x < lo[0]; ++x) {
      for (std::size_t y = 0; y < lo[1]; ++y) {
        for (std::size_t z = 0; z < lo[2]; ++z) {
          double s = 0.0;
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < r; ++j) {
              for (std::size_t k = 0; k < r; ++k) s += v.data.at(c, x * r + i, y * r + j, z * r + k);
            }
          }
          out.data.at(c, x, y, z) = s * inv;
        }
      }
    }
  }
  for (std::size_t x = 0; x < lo[0]; ++x) {
    for (std::size_t y = 0; y < lo[1]; ++y) {
      for (std::size_t z = 0; z < lo[2]; ++z) {
        bool any = false;
        for (std::size_t i = 0; i < r && !any; ++i) {
          for (std::size_t j = 0; j < r && !any; ++j) {
            for (std::size_t k = 0; k < r && !any; ++k) any = v.masked(x * r + i, y * r + j, z * r + k);
          }
        }
        out.mask[out.voxel(x, y, z)] = any ? 1 : 0;
      }
    }
  }
  return out;
}

void PatchGeometry::validate() const {
  if (shrink % 2 != 0) throw ConfigError("network shrink must be even to centre the output footprint");
  if (input_extent <= shrink) {
    throw ConfigError("patch extent " + std::to_string(input_extent) + " leaves no output after a shrink of " +
                      std::to_string(shrink));
  }
  if (rate == 0) throw ConfigError("upsampling rate must be positive");
}

Tensor<double> crop(const Tensor<double>& v, Index3 corner, std::size_t size) {
  const auto& s = v.shape();
  for (std::size_t a = 0; a < 3; ++a) {
    if (corner[a] + size > s[a + 1]) {
      throw ShapeError("crop of " + std::to_string(size) + " at " + std::to_string(corner[a]) +
                       " exceeds extent " + std::to_string(s[a + 1]) + " on axis " + std::to_string(a));
    }
  }
  Tensor<double> out(Shape{s[0], size, size, size}, MemoryKind::untracked);
  for (std::size_t c = 0; c < s[0]; ++c) {
    for (std::size_t x = 0; x < size; ++x) {
      for (std::size_t y = 0; y < size; ++y) {
        const double* src = v.data().data() + v.offset(c, corner[0] + x, corner[1] + y, corner[2]);
        std::copy_n(src, size, out.data().data() + out.offset(c, x, y, 0));
      }
    }
  }
  return out;
}

namespace {

std::vector<Index3> valid_corners(const Volume& lr, const PatchGeometry& g) {
  const auto e = lr.extents();
  std::vector<Index3> out;
  for (std::size_t a = 0; a < 3; ++a) {
    if (e[a] < g.input_extent) return out;
  }
  const std::size_t half = g.input_extent / 2;
  for (std::size_t x = 0; x + g.input_extent <= e[0]; ++x) {
    for (std::size_t y = 0; y + g.input_extent <= e[1]; ++y) {
      for (std::size_t z = 0; z + g.input_extent <= e[2]; ++z) {
        if (lr.masked(x + half, y + half, z + half)) out.push_back({x, y, z});
      }
    }
  }
  return out;
}

}  // namespace

std::size_t count_valid_positions(const Volume& lr, const PatchGeometry& geometry) {
  geometry.validate();
  return valid_corners(lr, geometry).size();
}

std::vector<PatchPair> extract_patches(const Volume& lr, const Volume& hr, std::size_t count,
                                       std::uint64_t seed, const PatchGeometry& g, std::size_t subject) {
  g.validate();
  lr.validate();
  hr.validate();
  const auto le = lr.extents();
  const auto he = hr.extents();
  for (std::size_t a = 0; a < 3; ++a) {
    if (he[a] != le[a] * g.rate) {
      throw ShapeError("HR extent " + std::to_string(he[a]) + " is not " + std::to_string(g.rate) +
                       " x LR extent " + std::to_string(le[a]));
    }
  }
  if (lr.channels() != hr.channels()) throw ShapeError("LR and HR channel counts differ");

  auto corners = valid_corners(lr, g);
  if (corners.size() < count) {
    throw DataError("requested " + std::to_string(count) + " patches but only " +
                    std::to_string(corners.size()) + " positions have a masked centre");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, corners.size() - 1);
    std::swap(corners[i], corners[pick(rng)]);
  }

  const std::size_t hr_size = g.rate * g.output_extent();
  std::vector<PatchPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& c = corners[i];
    PatchPair p;
    p.location = {subject, c};
    p.lr = crop(lr.data, c, g.input_extent);
    const Index3 h{g.rate * (c[0] + g.margin()), g.rate * (c[1] + g.margin()), g.rate * (c[2] + g.margin())};
    p.hr_target_pre_shuffle = inverse_shuffle(crop(hr.data, h, hr_size), g.rate);
    p.hr_target_pre_shuffle.set_kind(MemoryKind::untracked);
    out.push_back(std::move(p));
  }
  return out;
}

void NormalizationStats::validate() const {
  if (lr_mean.size() != lr_var.size() || hr_mean.size() != hr_var.size() || lr_mean.empty() ||
      hr_mean.empty()) {
    throw DataError("normalisation statistics are incomplete");
  }
  auto check = [](const std::vector<double>& var, const char* which) {
    for (std::size_t c = 0; c < var.size(); ++c) {
      if (!(var[c] > 0.0) || !std::isfinite(var[c])) {
        throw DataError(std::string(which) + " channel " + std::to_string(c) + " has degenerate variance");
      }
    }
  };
  check(lr_var, "LR");
  check(hr_var, "HR");
}

namespace {

// Maps the channel index of tensor `t` to a statistics slot.
template <class Map>
void add_sums(const Tensor<double>& t, Map slot, std::vector<double>& sum, std::vector<double>& n,
              const std::vector<double>* mean) {
  const std::size_t per = t.shape().spatial_numel();
  for (std::size_t c = 0; c < t.shape()[0]; ++c) {
    const double* p = t.data().data() + c * per;
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double v = mean ? (p[i] - (*mean)[slot(c)]) * (p[i] - (*mean)[slot(c)]) : p[i];
      s += v;
    }
    sum[slot(c)] += s;
    n[slot(c)] += static_cast<double>(per);
  }
}

}  // namespace

NormalizationStats compute_normalization(const std::vector<PatchPair>& patches, std::size_t rate) {
  if (patches.empty()) throw DataError("normalisation needs at least one patch");
  NormalizationStats s;
  s.rate = rate;
  const std::size_t c_lr = patches.front().lr.shape()[0];
  const std::size_t r3 = rate * rate * rate;
  const std::size_t c_hr = patches.front().hr_target_pre_shuffle.shape()[0] / r3;
  auto lr_slot = [](std::size_t c) { return c; };
  auto hr_slot = [r3](std::size_t q) { return q / r3; };

  std::vector<double> sum(c_lr, 0.0), n(c_lr, 0.0), hsum(c_hr, 0.0), hn(c_hr, 0.0);
  for (const auto& p : patches) {
    add_sums(p.lr, lr_slot, sum, n, nullptr);
    add_sums(p.hr_target_pre_shuffle, hr_slot, hsum, hn, nullptr);
  }
  s.lr_mean.resize(c_lr);
  s.hr_mean.resize(c_hr);
  for (std::size_t c = 0; c < c_lr; ++c) s.lr_mean[c] = sum[c] / n[c];
  for (std::size_t c = 0; c < c_hr; ++c) s.hr_mean[c] = hsum[c] / hn[c];

  std::fill(sum.begin(), sum.end(), 0.0);
  std::fill(n.begin(), n.end(), 0.0);
  std::fill(hsum.begin(), hsum.end(), 0.0);
  std::fill(hn.begin(), hn.end(), 0.0);
  for (const auto& p : patches) {
    add_sums(p.lr, lr_slot, sum, n, &s.lr_mean);
    add_sums(p.hr_target_pre_shuffle, hr_slot, hsum, hn, &s.hr_mean);
  }
  s.lr_var.resize(c_lr);
  s.hr_var.resize(c_hr);
  for (std::size_t c = 0; c < c_lr; ++c) s.lr_var[c] = sum[c] / n[c];
  for (std::size_t c = 0; c < c_hr; ++c) s.hr_var[c] = hsum[c] / hn[c];
  s.validate();
  return s;
}

namespace {

template <class Map>
void affine_channels(Tensor<double>& t, Map slot, const std::vector<double>& mean,
                     const std::vector<double>& var, bool forward) {
  const std::size_t per = t.shape().spatial_numel();
  for (std::size_t c = 0; c < t.shape()[0]; ++c) {
    const std::size_t k = slot(c);
    if (k >= mean.size() || k >= var.size()) {
      throw ShapeError("tensor channel " + std::to_string(c) + " has no normalisation statistics");
    }
    const double m = mean[k];
    const double sd = std::sqrt(var[k]);
    double* p = t.data().data() + c * per;
    for (std::size_t i = 0; i < per; ++i) p[i] = forward ? (p[i] - m) / sd : p[i] * sd + m;
  }
}

}  // namespace

void normalize_channels(Tensor<double>& t, const std::vector<double>& mean, const std::vector<double>& var) {
  affine_channels(t, [](std::size_t c) { return c; }, mean, var, true);
}

void denormalize_channels(Tensor<double>& t, const std::vector<double>& mean, const std::vector<double>& var) {
  affine_channels(t, [](std::size_t c) { return c; }, mean, var, false);
}

void normalize_target(Tensor<double>& t, const NormalizationStats& s) {
  const std::size_t r3 = s.rate * s.rate * s.rate;
  affine_channels(t, [r3](std::size_t q) { return q / r3; }, s.hr_mean, s.hr_var, true);
}

void denormalize_target(Tensor<double>& t, const NormalizationStats& s) {
  const std::size_t r3 = s.rate * s.rate * s.rate;
  affine_channels(t, [r3](std::size_t q) { return q / r3; }, s.hr_mean, s.hr_var, false);
}

template <std::floating_point T>
std::vector<Sample<T>> make_samples(const std::vector<PatchPair>& patches, const NormalizationStats& stats) {
  std::vector<Sample<T>> out;
  out.reserve(patches.size());
  for (const auto& p : patches) {
    Tensor<double> x = p.lr;
    Tensor<double> y = p.hr_target_pre_shuffle;
    normalize_channels(x, stats.lr_mean, stats.lr_var);
    normalize_target(y, stats);
    out.push_back({cast<T>(x, MemoryKind::untracked), cast<T>(y, MemoryKind::untracked)});
  }
  return out;
}

template std::vector<Sample<float>> make_samples(const std::vector<PatchPair>&, const NormalizationStats&);
template std::vector<Sample<double>> make_samples(const std::vector<PatchPair>&, const NormalizationStats&);

Tensor<double> stitch(const std::vector<StitchPatch>& patches, std::size_t channels, Index3 hr_extents,
                      std::size_t rate) {
  Tensor<double> out(Shape{channels, hr_extents[0], hr_extents[1], hr_extents[2]}, MemoryKind::untracked);
  std::vector<std::uint32_t> hits(hr_extents[0] * hr_extents[1] * hr_extents[2], 0);
  for (const auto& p : patches) {
    const auto& s = p.hr.shape();
    if (s.rank() != 4 || s[0] != channels) {
      throw ShapeError("stitch patch " + s.to_string() + " does not have " + std::to_string(channels) +
                       " channels");
    }
    Index3 at{};
    for (std::size_t a = 0; a < 3; ++a) {
      at[a] = rate * p.footprint_corner[a];
      if (at[a] + s[a + 1] > hr_extents[a]) {
        throw ShapeError("stitch patch at HR offset " + std::to_string(at[a]) + " with extent " +
                         std::to_string(s[a + 1]) + " overruns axis " + std::to_string(a) + " of size " +
                         std::to_string(hr_extents[a]));
      }
    }
    // Running mean: identical overlapping values reproduce themselves exactly.
    for (std::size_t x = 0; x < s[1]; ++x) {
      for (std::size_t y = 0; y < s[2]; ++y) {
        for (std::size_t z = 0; z < s[3]; ++z) {
          const double n = ++hits[((at[0] + x) * hr_extents[1] + at[1] + y) * hr_extents[2] + at[2] + z];
          for (std::size_t c = 0; c < channels; ++c) {
            double& o = out.at(c, at[0] + x, at[1] + y, at[2] + z);
            o += (p.hr.at(c, x, y, z) - o) / n;
          }
        }
      }
    }
  }
  return out;
}

std::vector<std::size_t> tile_starts(std::size_t extent, std::size_t tile) {
  if (tile == 0 || extent < tile) {
    throw ShapeError("tile of " + std::to_string(tile) + " does not fit extent " + std::to_string(extent));
  }
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s + tile <= extent; s += tile) out.push_back(s);
  if (out.back() + tile < extent) out.push_back(extent - tile);
  return out;
}

}  // namespace revprop
