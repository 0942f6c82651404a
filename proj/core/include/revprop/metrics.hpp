#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "revprop/tensor.hpp"

namespace revprop {

struct RegionRmse {
  std::optional<double> interior;  ///< empty when the region has no voxels
  std::optional<double> exterior;
  std::optional<double> total;
};

/// Masked voxels whose whole Chebyshev m-neighbourhood is masked (voxels
/// outside the grid count as unmasked).
std::vector<std::uint8_t> interior_mask(const std::vector<std::uint8_t>& mask, std::size_t nx,
                                        std::size_t ny, std::size_t nz, std::size_t margin);

/// RMSE over channels x voxels of the interior, exterior (mask minus
/// interior) and whole mask. Throws ShapeError on mismatched extents.
RegionRmse evaluate_rmse(const Tensor<double>& pred, const Tensor<double>& truth,
                         const std::vector<std::uint8_t>& mask, std::size_t margin = 2);

struct WilcoxonResult {
  double w = 0.0;        ///< min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_two_sided = 1.0;
  std::size_t n = 0;     ///< pairs left after dropping zero differences
};

/// Signed-rank test on the paired differences a - b. Zero differences are
/// dropped, tied magnitudes get midranks, and p is exact:
/// min(1, 2 P(W+ <= W)) under the 2^n equally likely sign patterns, counted by
/// dynamic programming over doubled ranks. Throws DataError when every
/// difference is zero or the inputs differ in length.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace revprop
