#pragma once

// Differentiable augmentation (colour, translation, cutout) for GAN training.
// Every op is affine in the image for fixed random draws, so the backward
// pass is exact and needs only the draws.

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xaigan/tensor.hpp"

namespace xaigan {

enum class AugOp { color, translation, cutout };

struct AugPolicy {
  std::vector<AugOp> ops;  // applied in canonical order color → translation → cutout
  double brightness = 0.5;             // shift ~ U(-b, b)
  double saturation_lo = 0.0, saturation_hi = 2.0;
  double contrast_lo = 0.5, contrast_hi = 1.5;
  double translation_ratio = 0.125;    // max shift as a fraction of the side
  double cutout_ratio = 0.5;           // square side as a fraction of the side

  bool has(AugOp op) const { return std::find(ops.begin(), ops.end(), op) != ops.end(); }
};

/// Parses "color,translation,cutout" (any subset, each at most once).
inline AugPolicy parse_aug_policy(const std::string& text) {
  AugPolicy p;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (tok.empty()) continue;
    AugOp op;
    if (tok == "color") op = AugOp::color;
    else if (tok == "translation") op = AugOp::translation;
    else if (tok == "cutout") op = AugOp::cutout;
    else throw ConfigError("aug_policy", "unknown augmentation '" + tok + "'");
    if (p.has(op)) throw ConfigError("aug_policy", "augmentation '" + tok + "' listed twice");
    p.ops.push_back(op);
  }
  std::sort(p.ops.begin(), p.ops.end());
  return p;
}

/// Random draws for one step, one entry per batch item.
struct AugDraws {
  std::vector<double> brightness, saturation, contrast;
  std::vector<int> shift_x, shift_y;      // content moves by (+x columns, +y rows)
  std::vector<int> cut_cx, cut_cy;        // cutout centre
  int cut_size = 0;
};

inline AugDraws sample_augmentation(const AugPolicy& p, std::size_t batch, std::size_t height, std::size_t width,
                                    std::mt19937_64& rng) {
  AugDraws d;
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto randint = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const auto h = static_cast<int>(height), w = static_cast<int>(width);
  for (std::size_t i = 0; i < batch; ++i) {
    if (p.has(AugOp::color)) {
      d.brightness.push_back(uni(-p.brightness, p.brightness));
      d.saturation.push_back(uni(p.saturation_lo, p.saturation_hi));
      d.contrast.push_back(uni(p.contrast_lo, p.contrast_hi));
    }
    if (p.has(AugOp::translation)) {
      const int sx = static_cast<int>(w * p.translation_ratio + 0.5), sy = static_cast<int>(h * p.translation_ratio + 0.5);
      d.shift_x.push_back(randint(-sx, sx));
      d.shift_y.push_back(randint(-sy, sy));
    }
    if (p.has(AugOp::cutout)) {
      d.cut_size = static_cast<int>(h * p.cutout_ratio + 0.5);
      d.cut_cx.push_back(randint(0, w + (1 - d.cut_size % 2) - 1));
      d.cut_cy.push_back(randint(0, h + (1 - d.cut_size % 2) - 1));
    }
  }
  return d;
}

namespace detail {

struct ImageView {
  std::size_t n, c, h, w;
  std::size_t item() const { return c * h * w; }
  std::size_t plane() const { return h * w; }
};

inline ImageView view_of(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("diff_augment", "expected (N,C,H,W), got " + shape_str(x.shape()));
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

inline void check_draws(const AugPolicy& p, const AugDraws& d, std::size_t n) {
  auto need = [&](bool on, std::size_t have) {
    if (on && have < n) throw ShapeError("diff_augment", "draws cover " + std::to_string(have) + " of " + std::to_string(n) + " items");
  };
  need(p.has(AugOp::color), d.brightness.size());
  need(p.has(AugOp::translation), d.shift_x.size());
  need(p.has(AugOp::cutout), d.cut_cx.size());
}

// y = s * x + (1 - s) * mean_channels(x)  (per pixel). Self-adjoint.
inline void saturation(Tensor& x, const ImageView& v, std::size_t b, double s) {
  double* img = x.ptr() + b * v.item();
  for (std::size_t p = 0; p < v.plane(); ++p) {
    double m = 0.0;
    for (std::size_t ch = 0; ch < v.c; ++ch) m += img[ch * v.plane() + p];
    m /= static_cast<double>(v.c);
    for (std::size_t ch = 0; ch < v.c; ++ch) img[ch * v.plane() + p] = s * img[ch * v.plane() + p] + (1 - s) * m;
  }
}

// y = c * x + (1 - c) * mean(x over the whole item). Self-adjoint.
inline void contrast(Tensor& x, const ImageView& v, std::size_t b, double c) {
  double* img = x.ptr() + b * v.item();
  double m = 0.0;
  for (std::size_t i = 0; i < v.item(); ++i) m += img[i];
  m /= static_cast<double>(v.item());
  for (std::size_t i = 0; i < v.item(); ++i) img[i] = c * img[i] + (1 - c) * m;
}

// out[y][x] = in[y - dy][x - dx], zero outside.
inline void shift(Tensor& x, const ImageView& v, std::size_t b, int dx, int dy) {
  double* img = x.ptr() + b * v.item();
  std::vector<double> tmp(img, img + v.item());
  const auto h = static_cast<int>(v.h), w = static_cast<int>(v.w);
  for (std::size_t ch = 0; ch < v.c; ++ch)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const int sy = yy - dy, sx = xx - dx;
        img[ch * v.plane() + yy * w + xx] =
            (sy >= 0 && sy < h && sx >= 0 && sx < w) ? tmp[ch * v.plane() + sy * w + sx] : 0.0;
      }
}

inline void cutout(Tensor& x, const ImageView& v, std::size_t b, int cx, int cy, int size) {
  double* img = x.ptr() + b * v.item();
  const int y0 = std::max(0, cy - size / 2), y1 = std::min(static_cast<int>(v.h), cy - size / 2 + size);
  const int x0 = std::max(0, cx - size / 2), x1 = std::min(static_cast<int>(v.w), cx - size / 2 + size);
  for (std::size_t ch = 0; ch < v.c; ++ch)
    for (int yy = y0; yy < y1; ++yy)
      for (int xx = x0; xx < x1; ++xx) img[ch * v.plane() + yy * v.w + xx] = 0.0;
}

}  // namespace detail

/// Applies the policy with the given draws; output has the input's shape.
inline Tensor diff_augment(const Tensor& x, const AugPolicy& p, const AugDraws& d) {
  const detail::ImageView v = detail::view_of(x);
  detail::check_draws(p, d, v.n);
  Tensor y = x;
  for (std::size_t b = 0; b < v.n; ++b) {
    if (p.has(AugOp::color)) {
      double* img = y.ptr() + b * v.item();
      for (std::size_t i = 0; i < v.item(); ++i) img[i] += d.brightness[b];
      detail::saturation(y, v, b, d.saturation[b]);
      detail::contrast(y, v, b, d.contrast[b]);
    }
    if (p.has(AugOp::translation)) detail::shift(y, v, b, d.shift_x[b], d.shift_y[b]);
    if (p.has(AugOp::cutout)) detail::cutout(y, v, b, d.cut_cx[b], d.cut_cy[b], d.cut_size);
  }
  return y;
}

/// Vector-Jacobian product of diff_augment for the same draws.
inline Tensor diff_augment_backward(const Tensor& grad_out, const AugPolicy& p, const AugDraws& d) {
  const detail::ImageView v = detail::view_of(grad_out);
  detail::check_draws(p, d, v.n);
  Tensor g = grad_out;
  for (std::size_t b = 0; b < v.n; ++b) {
    if (p.has(AugOp::cutout)) detail::cutout(g, v, b, d.cut_cx[b], d.cut_cy[b], d.cut_size);
    if (p.has(AugOp::translation)) {
      // Adjoint of a zero-filled shift is the opposite shift.
      detail::shift(g, v, b, -d.shift_x[b], -d.shift_y[b]);
    }
    if (p.has(AugOp::color)) {
      detail::contrast(g, v, b, d.contrast[b]);
      detail::saturation(g, v, b, d.saturation[b]);
      // brightness is a shift: identity Jacobian
    }
  }
  return g;
}

}  // namespace xaigan
