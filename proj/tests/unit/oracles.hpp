#pragma once

// Independent reference implementations and numeric helpers for the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "adtrack/tensor.hpp"

namespace adtrack::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  return (a.flat() - b.flat()).cwiseAbs().maxCoeff();
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  const double denom = std::max(a.flat().norm(), b.flat().norm());
  return denom == 0.0 ? 0.0 : (a.flat() - b.flat()).norm() / denom;
}

inline Tensor numeric_gradient(const Tensor& x, const std::function<double(const Tensor&)>& f,
                               double eps = 1e-5) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

// Straight quadruple loop over output cells.
inline Tensor conv2d_oracle(const Tensor& x, const ConvSpec& spec) {
  const Index co = spec.kernel.extent(0), ci = spec.kernel.extent(1);
  const Index kh = spec.kernel.extent(2), kw = spec.kernel.extent(3);
  const Index h = x.extent(1), w = x.extent(2);
  const Index oh = (h + 2 * spec.padding - kh) / spec.stride + 1;
  const Index ow = (w + 2 * spec.padding - kw) / spec.stride + 1;
  Tensor out({co, oh, ow});
  for (Index o = 0; o < co; ++o)
    for (Index y = 0; y < oh; ++y)
      for (Index xx = 0; xx < ow; ++xx) {
        double s = spec.bias ? (*spec.bias)[o] : 0.0;
        for (Index c = 0; c < ci; ++c)
          for (Index dy = 0; dy < kh; ++dy)
            for (Index dx = 0; dx < kw; ++dx) {
              const Index iy = y * spec.stride + dy - spec.padding;
              const Index ix = xx * spec.stride + dx - spec.padding;
              if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
              s += x(c, iy, ix) * spec.kernel(o, c, dy, dx);
            }
        out(o, y, xx) = s;
      }
  return out;
}

// Sliding dot product of key over search.
inline Tensor correlate_oracle(const Tensor& key, const Tensor& search) {
  const Index c = key.extent(0), kh = key.extent(1), kw = key.extent(2);
  const Index oh = search.extent(1) - kh + 1, ow = search.extent(2) - kw + 1;
  Tensor out({oh, ow});
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < ow; ++x) {
      double s = 0.0;
      for (Index k = 0; k < c; ++k)
        for (Index dy = 0; dy < kh; ++dy)
          for (Index dx = 0; dx < kw; ++dx) s += search(k, y + dy, x + dx) * key(k, dy, dx);
      out(y, x) = s;
    }
  return out;
}

}  // namespace adtrack::testing
