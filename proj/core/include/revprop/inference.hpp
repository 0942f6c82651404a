#pragma once

#include <concepts>

#include "revprop/data.hpp"
#include "revprop/network.hpp"

namespace revprop {

/// Patch-wise super-resolution of a whole LR volume. The normalised LR
/// volume is zero-padded by the network margin, tiled so the output
/// footprints cover every LR voxel, and the denormalised, shuffled HR
/// patches are stitched (overlaps averaged). Returns (C, r X, r Y, r Z).
/// Throws ShapeError when the volume is smaller than one output footprint.
template <std::floating_point T>
Tensor<double> predict_volume(const NetworkParams<T>& params, const NetworkSpec& spec, const Volume& lr,
                              const NormalizationStats& stats, std::size_t patch_extent,
                              std::size_t threads = 0);

}  // namespace revprop
