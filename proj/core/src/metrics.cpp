#include "revprop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "revprop/error.hpp"

namespace revprop {

std::vector<std::uint8_t> interior_mask(const std::vector<std::uint8_t>& mask, std::size_t nx,
                                        std::size_t ny, std::size_t nz, std::size_t margin) {
  if (mask.size() != nx * ny * nz) throw ShapeError("mask size does not match extents");
  // Separable erosion: a cube min-filter is three 1-D min-filters.
  std::vector<std::uint8_t> cur = mask;
  std::vector<std::uint8_t> next(mask.size());
  const std::size_t n[3] = {nx, ny, nz};
  const std::size_t stride[3] = {ny * nz, nz, 1};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t len = n[axis];
    const std::size_t st = stride[axis];
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const std::size_t pos = (i / st) % len;
      std::uint8_t keep = 1;
      if (pos < margin || pos + margin >= len) {
        keep = 0;
      } else {
        for (std::size_t d = 0; d <= 2 * margin && keep; ++d) {
          keep = cur[i - margin * st + d * st];
        }
      }
      next[i] = keep && cur[i] ? 1 : 0;
    }
    std::swap(cur, next);
  }
  return cur;
}

RegionRmse evaluate_rmse(const Tensor<double>& pred, const Tensor<double>& truth,
                         const std::vector<std::uint8_t>& mask, std::size_t margin) {
  if (pred.shape() != truth.shape()) {
    throw ShapeError("prediction " + pred.shape().to_string() + " does not match truth " +
                     truth.shape().to_string());
  }
  const auto& s = truth.shape();
  if (s.rank() != 4) throw ShapeError("evaluate_rmse expects (C, X, Y, Z) volumes");
  if (mask.size() != s.spatial_numel()) throw ShapeError("mask does not match the volume extents");
  const auto inner = interior_mask(mask, s[1], s[2], s[3], margin);
  const std::size_t per = s.spatial_numel();

  double sum_in = 0.0, sum_ex = 0.0;
  std::size_t n_in = 0, n_ex = 0;
  for (std::size_t c = 0; c < s[0]; ++c) {
    const double* p = pred.data().data() + c * per;
    const double* t = truth.data().data() + c * per;
    for (std::size_t i = 0; i < per; ++i) {
      if (!mask[i]) continue;
      const double d = (p[i] - t[i]) * (p[i] - t[i]);
      if (inner[i]) {
        sum_in += d;
        ++n_in;
      } else {
        sum_ex += d;
        ++n_ex;
      }
    }
  }
  RegionRmse r;
  if (n_in) r.interior = std::sqrt(sum_in / static_cast<double>(n_in));
  if (n_ex) r.exterior = std::sqrt(sum_ex / static_cast<double>(n_ex));
  if (n_in + n_ex) r.total = std::sqrt((sum_in + sum_ex) / static_cast<double>(n_in + n_ex));
  return r;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired samples differ in length");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diff.push_back(d);
  }
  if (diff.empty()) throw DataError("all paired differences are zero");
  const std::size_t n = diff.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(diff[i]) < std::abs(diff[j]); });
  // Doubled midranks stay integral: tied run over positions [i, j) gets i + j + 1.
  std::vector<std::size_t> rank2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && std::abs(diff[order[j]]) == std::abs(diff[order[i]])) ++j;
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = i + j + 1;
    i = j;
  }

  WilcoxonResult r;
  r.n = n;
  std::size_t plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diff[i] > 0) plus2 += rank2[i];
  }
  const std::size_t minus2 = total2 - plus2;
  r.w_plus = static_cast<double>(plus2) / 2.0;
  r.w_minus = static_cast<double>(minus2) / 2.0;
  const std::size_t w2 = std::min(plus2, minus2);
  r.w = static_cast<double>(w2) / 2.0;

  // ways[s]: sign patterns whose doubled positive-rank sum is s.
  std::vector<double> ways(total2 + 1, 0.0);
  ways[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = reach + 1; s-- > 0;) {
      if (ways[s] != 0.0) ways[s + rank2[i]] += ways[s];
    }
    reach += rank2[i];
  }
  double below = 0.0;
  for (std::size_t s = 0; s <= w2; ++s) below += ways[s];
  const double total = std::ldexp(1.0, static_cast<int>(n));
  r.p_two_sided = std::min(1.0, 2.0 * below / total);
  return r;
}

}  // namespace revprop
