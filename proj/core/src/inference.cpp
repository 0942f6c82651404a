#include "revprop/inference.hpp"

#include "revprop/ops.hpp"
#include "revprop/parallel.hpp"

namespace revprop {

template <std::floating_point T>
Tensor<double> predict_volume(const NetworkParams<T>& params, const NetworkSpec& spec, const Volume& lr,
                              const NormalizationStats& stats, std::size_t patch_extent,
                              std::size_t threads) {
  lr.validate();
  const PatchGeometry g{patch_extent, spec.spatial_shrink(), spec.upsampling_rate};
  g.validate();
  if (lr.channels() != spec.input_channels) {
    throw ShapeError("volume has " + std::to_string(lr.channels()) + " channels, network expects " +
                     std::to_string(spec.input_channels));
  }
  const auto ext = lr.extents();
  const std::size_t out = g.output_extent();
  for (std::size_t a = 0; a < 3; ++a) {
    if (ext[a] < out) {
      throw ShapeError("LR extent " + std::to_string(ext[a]) + " is smaller than the output footprint " +
                       std::to_string(out));
    }
  }

  Tensor<double> norm = lr.data;
  normalize_channels(norm, stats.lr_mean, stats.lr_var);
  const std::size_t m = g.margin();
  Tensor<double> padded(Shape{lr.channels(), ext[0] + 2 * m, ext[1] + 2 * m, ext[2] + 2 * m},
                        MemoryKind::untracked);
  for (std::size_t c = 0; c < lr.channels(); ++c) {
    for (std::size_t x = 0; x < ext[0]; ++x) {
      for (std::size_t y = 0; y < ext[1]; ++y) {
        for (std::size_t z = 0; z < ext[2]; ++z) padded.at(c, x + m, y + m, z + m) = norm.at(c, x, y, z);
      }
    }
  }

  std::vector<Index3> corners;
  for (auto x : tile_starts(ext[0], out)) {
    for (auto y : tile_starts(ext[1], out)) {
      for (auto z : tile_starts(ext[2], out)) corners.push_back({x, y, z});
    }
  }
  std::vector<StitchPatch> patches(corners.size());
  parallel_for(corners.size(), threads == 0 ? worker_threads() : threads, [&](std::size_t i) {
    // Footprint corner f in LR space is the input corner f in padded space.
    auto input = cast<T>(crop(padded, corners[i], patch_extent));
    auto pred = cast<double>(forward(params, spec, input, ForwardMode::inference).output,
                             MemoryKind::untracked);
    denormalize_target(pred, stats);
    patches[i].footprint_corner = corners[i];
    patches[i].hr = shuffle(pred, g.rate);
  });
  const Index3 hr{ext[0] * g.rate, ext[1] * g.rate, ext[2] * g.rate};
  return stitch(patches, lr.channels(), hr, g.rate);
}

template Tensor<double> predict_volume(const NetworkParams<float>&, const NetworkSpec&, const Volume&,
                                       const NormalizationStats&, std::size_t, std::size_t);
template Tensor<double> predict_volume(const NetworkParams<double>&, const NetworkSpec&, const Volume&,
                                       const NormalizationStats&, std::size_t, std::size_t);

}  // namespace revprop
