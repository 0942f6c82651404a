#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "revprop/error.hpp"
#include "revprop/tensor.hpp"
#include "revprop/trainer.hpp"

namespace revprop {

using Index3 = std::array<std::size_t, 3>;

/// A multi-channel volume (C, X, Y, Z) with a binary mask over (X, Y, Z).
/// Storage is not charged to the activation ledger.
struct Volume {
  Tensor<double> data;
  std::vector<std::uint8_t> mask;  ///< 0/1 per voxel, row-major over (X, Y, Z)

  Volume() = default;
  Volume(std::size_t channels, Index3 extents);

  [[nodiscard]] std::size_t channels() const { return data.shape()[0]; }
  [[nodiscard]] Index3 extents() const { return {data.shape()[1], data.shape()[2], data.shape()[3]}; }
  [[nodiscard]] std::size_t voxel(std::size_t x, std::size_t y, std::size_t z) const {
    return (x * data.shape()[2] + y) * data.shape()[3] + z;
  }
  [[nodiscard]] bool masked(std::size_t x, std::size_t y, std::size_t z) const {
    return mask[voxel(x, y, z)] != 0;
  }
  [[nodiscard]] std::size_t mask_count() const;

  /// Throws ShapeError when the mask does not cover the spatial extents.
  void validate() const;
};

struct SyntheticConfig {
  std::size_t channels = 6;
  std::size_t extent = 64;  ///< cubic grid edge
  std::size_t bumps_per_channel = 30;
};

/// Smooth random field: per channel a sum of Gaussian bumps with random
/// centre, width and signed amplitude. The mask is a random ellipsoid around
/// the grid centre that stays clear of the boundary. Deterministic per seed.
Volume generate_synthetic_subject(std::uint64_t seed, const SyntheticConfig& config = {});

/// Each r^3 block replaced by its mean per channel; a low-resolution voxel is
/// masked when any voxel of its block is. Throws ShapeError on indivisible extents.
Volume downsample_blockmean(const Volume& v, std::size_t r);

/// Patch geometry shared by extraction, inference and stitching.
struct PatchGeometry {
  std::size_t input_extent = 11;  ///< LR patch edge
  std::size_t shrink = 4;         ///< network spatial shrink
  std::size_t rate = 2;

  [[nodiscard]] std::size_t output_extent() const { return input_extent - shrink; }
  [[nodiscard]] std::size_t margin() const { return shrink / 2; }
  /// Throws ConfigError unless the output is non-empty and shrink is even.
  void validate() const;
};

struct PatchLocation {
  std::size_t subject = 0;
  Index3 corner{};  ///< LR-space corner of the input patch
};

struct PatchPair {
  Tensor<double> lr;                     ///< (C, P, P, P)
  Tensor<double> hr_target_pre_shuffle;  ///< (r^3 C, P - s, P - s, P - s)
  PatchLocation location;
};

/// Crops (C, size^3) from a volume at `corner`.
Tensor<double> crop(const Tensor<double>& v, Index3 corner, std::size_t size);

/// Samples `count` distinct LR corners whose central voxel is masked and cuts
/// the aligned pairs. The HR region for corner c starts at r (c + shrink/2)
/// and spans r (P - shrink) voxels per axis. Throws DataError when fewer
/// than `count` positions qualify.
std::vector<PatchPair> extract_patches(const Volume& lr, const Volume& hr, std::size_t count,
                                       std::uint64_t seed, const PatchGeometry& geometry,
                                       std::size_t subject = 0);

/// Number of LR corners whose central voxel is masked.
std::size_t count_valid_positions(const Volume& lr, const PatchGeometry& geometry);

/// Deterministic shuffled partition; llround(fraction * n) items go to training.
template <class Item>
std::pair<std::vector<Item>, std::vector<Item>> split_train_validation(std::vector<Item> items,
                                                                       double fraction,
                                                                       std::uint64_t seed) {
  if (items.size() < 2) throw DataError("splitting needs at least 2 items");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(items.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, items.size() - 1);
  std::pair<std::vector<Item>, std::vector<Item>> out;
  out.first.reserve(n_train);
  out.second.reserve(items.size() - n_train);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(std::move(items[idx[i]]));
  }
  return out;
}

/// Per-channel mean and variance of LR inputs and HR targets. HR statistics
/// are indexed by HR channel; pre-shuffle channel q belongs to HR channel q / r^3.
struct NormalizationStats {
  std::vector<double> lr_mean, lr_var;
  std::vector<double> hr_mean, hr_var;
  std::size_t rate = 2;

  /// Throws DataError unless every variance is positive and finite.
  void validate() const;
};

/// Population statistics over all voxels of all patches (two-pass, fixed order).
NormalizationStats compute_normalization(const std::vector<PatchPair>& patches, std::size_t rate);

/// (x - mean) / sqrt(var) per channel of a (C, ...) tensor, in place.
void normalize_channels(Tensor<double>& t, const std::vector<double>& mean, const std::vector<double>& var);
void denormalize_channels(Tensor<double>& t, const std::vector<double>& mean, const std::vector<double>& var);

/// Same for pre-shuffle targets, mapping channel q to statistics q / r^3.
void normalize_target(Tensor<double>& t, const NormalizationStats& s);
void denormalize_target(Tensor<double>& t, const NormalizationStats& s);

/// Normalised training samples in precision T.
template <std::floating_point T>
std::vector<Sample<T>> make_samples(const std::vector<PatchPair>& patches, const NormalizationStats& stats);

/// An HR patch placed at `rate * footprint_corner`, footprint_corner being the
/// LR corner of the region the patch predicts.
struct StitchPatch {
  Index3 footprint_corner{};
  Tensor<double> hr;  ///< (C, E, E, E)
};

/// Averages overlapping patches into a zero-initialised (C, extents) volume.
/// Throws ShapeError on out-of-bounds placement or a channel mismatch.
Tensor<double> stitch(const std::vector<StitchPatch>& patches, std::size_t channels, Index3 hr_extents,
                      std::size_t rate);

/// Footprint corners along one axis: 0, stride, 2 stride, ..., with the last
/// clamped so the tiling covers [0, extent).
std::vector<std::size_t> tile_starts(std::size_t extent, std::size_t tile);

}  // namespace revprop
