#pragma once

// Reference implementations used only by the tests. Deliberately naive:
// nested loops straight from the definitions, no shared code with the
// library kernels.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "xaigan/tensor.hpp"

namespace oracle {

using xaigan::Tensor;

/// Direct convolution sum, zero padding.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t co = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Tensor y({n, co, oh, ow});
  for (std::size_t b0 = 0; b0 < n; ++b0)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double s = b[o];
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const long yy = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long xx = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                s += x.at(b0, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) * w.at(o, c, u, v);
              }
          y.at(b0, o, i, j) = s;
        }
  return y;
}

/// Transposed convolution by scattering every input pixel.
inline Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t co = w.dim(1), k = w.dim(2);
  const std::size_t oh = (h - 1) * stride + k - 2 * pad, ow = (wd - 1) * stride + k - 2 * pad;
  Tensor y({n, co, oh, ow});
  for (std::size_t b0 = 0; b0 < n; ++b0)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) y.at(b0, o, i, j) = b[o];
  for (std::size_t b0 = 0; b0 < n; ++b0)
    for (std::size_t c = 0; c < ci; ++c)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j)
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const long yy = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long xx = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(oh) || xx >= static_cast<long>(ow)) continue;
                y.at(b0, o, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) +=
                    x.at(b0, c, i, j) * w.at(c, o, u, v);
              }
  return y;
}

/// Central-difference gradient of a scalar function of x.
inline Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double o = x[i];
    x[i] = o + h;
    const double up = f(x);
    x[i] = o - h;
    const double down = f(x);
    x[i] = o;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Central, forward and backward differences at selected coordinates
/// (all of them when `coords` is empty).
inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

/// Central and one-sided slopes per coordinate, at step h and, where the
/// one-sided slopes disagree by more than 1e-4 (relative), also at h/10 and
/// h/100.
struct Slopes {
  std::vector<std::size_t> coords;
  std::vector<std::vector<double>> estimates;
};

inline bool kinked(double forward, double backward) { return rel(forward, backward) > 1e-4; }

inline Slopes numeric_slopes(const std::function<double(const Tensor&)>& f, Tensor x, std::vector<std::size_t> coords = {},
                             double h = 1e-5) {
  if (coords.empty())
    for (std::size_t i = 0; i < x.size(); ++i) coords.push_back(i);
  Slopes s{coords, {}};
  const double mid = f(x);
  for (std::size_t i : coords) {
    const double o = x[i];
    std::vector<double> est;
    double step = h;
    for (int r = 0; r < 3; ++r, step /= 10) {
      x[i] = o + step;
      const double up = f(x);
      x[i] = o - step;
      const double down = f(x);
      x[i] = o;
      const double fwd = (up - mid) / step, bwd = (mid - down) / step;
      est.push_back((up - down) / (2 * step));
      if (!kinked(fwd, bwd)) break;
      est.push_back(fwd);
      est.push_back(bwd);
    }
    s.estimates.push_back(std::move(est));
  }
  return s;
}

/// Central-difference error; where a piecewise-linear switch lies inside the
/// step, the best match among the one-sided and refined slopes.
inline double max_rel_error(const Tensor& analytic, const Slopes& s) {
  double m = 0.0;
  for (std::size_t k = 0; k < s.coords.size(); ++k) {
    double e = std::numeric_limits<double>::infinity();
    for (double v : s.estimates[k]) e = std::min(e, rel(analytic[s.coords[k]], v));
    m = std::max(m, e);
  }
  return m;
}

inline std::vector<std::size_t> sample_coords(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  return out;
}

inline double max_rel_error(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-8}));
  return m;
}

inline Tensor random(xaigan::Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  return Tensor::uniform(std::move(s), rng, lo, hi);
}

}  // namespace oracle
