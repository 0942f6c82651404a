#pragma once

#include <vector>

#include "revprop/ops.hpp"

namespace revprop::oracle {

/// Direct summation over (co, ox, oy, oz, ci, a, b, c), zero padding, stride 1.
inline Tensor<double> conv3d_direct(const Tensor<double>& x, const ConvKernel<double>& k) {
  const auto& s = x.shape();
  const std::size_t ci_n = s[0], co_n = k.weights.shape()[0], ks = k.weights.shape()[2];
  const long pad = static_cast<long>(k.padding);
  const std::size_t ox_n = s[1] + 2 * k.padding - ks + 1;
  const std::size_t oy_n = s[2] + 2 * k.padding - ks + 1;
  const std::size_t oz_n = s[3] + 2 * k.padding - ks + 1;
  Tensor<double> out(Shape{co_n, ox_n, oy_n, oz_n});
  for (std::size_t co = 0; co < co_n; ++co)
    for (std::size_t ox = 0; ox < ox_n; ++ox)
      for (std::size_t oy = 0; oy < oy_n; ++oy)
        for (std::size_t oz = 0; oz < oz_n; ++oz) {
          double acc = k.bias[co];
          for (std::size_t ci = 0; ci < ci_n; ++ci)
            for (std::size_t a = 0; a < ks; ++a)
              for (std::size_t b = 0; b < ks; ++b)
                for (std::size_t c = 0; c < ks; ++c) {
                  const long ix = static_cast<long>(ox + a) - pad;
                  const long iy = static_cast<long>(oy + b) - pad;
                  const long iz = static_cast<long>(oz + c) - pad;
                  if (ix < 0 || iy < 0 || iz < 0 || ix >= static_cast<long>(s[1]) ||
                      iy >= static_cast<long>(s[2]) || iz >= static_cast<long>(s[3]))
                    continue;
                  const std::size_t widx = (((co * ci_n + ci) * ks + a) * ks + b) * ks + c;
                  acc += k.weights[widx] * x.at(ci, static_cast<std::size_t>(ix), static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(iz));
                }
          out.at(co, ox, oy, oz) = acc;
        }
  return out;
}

}  // namespace revprop::oracle
