#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xaigan/loss.hpp"
#include "xaigan/network.hpp"

namespace xaigan {

enum class ExplainerKind { saliency, lime, deepshap };

inline std::string_view to_string(ExplainerKind k) {
  switch (k) {
    case ExplainerKind::saliency: return "saliency";
    case ExplainerKind::lime: return "lime";
    case ExplainerKind::deepshap: return "deepshap";
  }
  return "unknown";
}

/// Per-feature importance in [0,1] for one example (shape of the example).
struct ExplanationMask {
  Tensor values;
  ExplainerKind kind = ExplainerKind::saliency;
};

/// Baseline inputs for DeepLIFT, stacked along the batch axis.
class ReferenceSet {
 public:
  ReferenceSet() = default;
  explicit ReferenceSet(Tensor inputs) : inputs_(std::move(inputs)) {
    if (inputs_.empty()) throw ShapeError("ReferenceSet", "must hold at least one reference");
  }
  const Tensor& inputs() const { return inputs_; }
  std::size_t size() const { return inputs_.empty() ? 0 : inputs_.dim(0); }
  Shape item_shape() const { return inputs_.item_shape(); }

 private:
  Tensor inputs_;
};

// --------------------------------------------------------------------------
// Mask post-processing

/// |raw| / max|raw|; all zeros when raw is all zeros.
inline ExplanationMask normalize_mask(const Tensor& raw, ExplainerKind kind = ExplainerKind::saliency) {
  const double m = raw.max_abs();
  if (!std::isfinite(m) || !raw.all_finite()) throw NumericError("normalize_mask", "non-finite attribution");
  ExplanationMask out{raw.map([](double v) { return std::abs(v); }), kind};
  if (m > 0.0) out.values *= 1.0 / m;
  // Exact 1 at the arg-max regardless of rounding in the division.
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (std::abs(raw[i]) == m && m > 0.0) out.values[i] = 1.0;
  return out;
}

/// Normalizes each batch item independently.
inline Tensor normalize_batch(const Tensor& raw) {
  Tensor out(raw.shape());
  const std::size_t k = raw.item_size();
  for (std::size_t n = 0; n < raw.dim(0); ++n) {
    const Tensor m = normalize_mask(raw.slice(n, n + 1)).values;
    std::copy(m.values().begin(), m.values().end(), out.values().begin() + n * k);
  }
  return out;
}

/// For (N,C,H,W) inputs with C > 1: replaces every channel value by the
/// per-pixel maximum magnitude across channels. Other inputs pass through.
inline Tensor collapse_channels(const Tensor& t) {
  if (t.rank() != 4 || t.dim(1) == 1) return t;
  const std::size_t n = t.dim(0), c = t.dim(1), plane = t.dim(2) * t.dim(3);
  Tensor out(t.shape());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < plane; ++p) {
      double m = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) m = std::max(m, std::abs(t[(b * c + ch) * plane + p]));
      for (std::size_t ch = 0; ch < c; ++ch) out[(b * c + ch) * plane + p] = m;
    }
  return out;
}

// --------------------------------------------------------------------------
// Saliency

namespace detail {

inline Tensor backward_checked(Network& net, Tensor g) {
  for (std::size_t i = net.size(); i-- > 0;) {
    g = net.layer(i).backward(g, false);
    if (!g.all_finite()) throw NumericError(std::to_string(i) + ":" + net.layer(i).describe(), "non-finite gradient");
  }
  return g;
}

}  // namespace detail

/// Gradient of each example's "real"-label loss, -log D(x_i), with respect
/// to x_i. D runs in eval mode and its parameter gradients are untouched.
inline Tensor input_gradient(Network& D, const Tensor& x) {
  const Tensor p = D.forward(x, false);
  LossResult l = bce(p, 1.0);
  l.grad *= static_cast<double>(p.size());  // per-example loss, not the batch mean
  return detail::backward_checked(D, l.grad);
}

/// Raw saliency attribution: input gradient, channel-collapsed for colour images.
inline Tensor explain_saliency(Network& D, const Tensor& x) { return collapse_channels(input_gradient(D, x)); }

// --------------------------------------------------------------------------
// LIME

struct LimeOptions {
  std::size_t patch = 4;        // square segment side for (C,H,W) inputs
  double kernel_width = 0.25;   // on cosine distance
  double baseline = 0.0;        // value written into switched-off segments
  std::size_t chunk = 256;      // perturbations per discriminator call
  /// Explicit segment id per item element; overrides `patch` when set.
  std::optional<std::vector<std::size_t>> segments;
};

struct LimeResult {
  Tensor attribution;                       // per-element coefficient of its segment
  std::vector<std::vector<double>> coefficients;  // per item, per segment
  std::vector<double> intercepts;
  bool least_norm = false;                  // a rank-deficient system was solved
};

/// Segment id per element of one item: square patches per spatial position,
/// shared across channels; rank-1 items get one segment per feature.
inline std::vector<std::size_t> patch_segments(const Shape& item, std::size_t patch) {
  const std::size_t numel = shape_numel(item);
  std::vector<std::size_t> seg(numel);
  if (item.size() != 3) {
    for (std::size_t i = 0; i < numel; ++i) seg[i] = i;
    return seg;
  }
  const std::size_t h = item[1], w = item[2], cols = (w + patch - 1) / patch;
  for (std::size_t c = 0; c < item[0]; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) seg[(c * h + y) * w + x] = (y / patch) * cols + x / patch;
  return seg;
}

/// Lime-style local surrogate: random on/off segment perturbations, D queried
/// on each, weighted least squares from indicators to D's output. The first
/// perturbation is the unmodified input.
inline LimeResult explain_lime(Network& D, const Tensor& x, std::size_t n_samples, std::uint64_t seed,
                               const LimeOptions& opt = {}) {
  const Shape item = x.item_shape();
  const std::vector<std::size_t> seg = opt.segments ? *opt.segments : patch_segments(item, opt.patch);
  if (seg.size() != x.item_size())
    throw ShapeError("explain_lime", "segmentation covers " + std::to_string(seg.size()) + " of " +
                                         std::to_string(x.item_size()) + " elements");
  const std::size_t n_seg = *std::max_element(seg.begin(), seg.end()) + 1;
  if (n_samples < n_seg)
    throw ConfigError("lime.n_samples", std::to_string(n_samples) + " < " + std::to_string(n_seg) + " segments");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  LimeResult res{Tensor(x.shape()), {}, {}, false};
  const std::size_t k = x.item_size();

  for (std::size_t b = 0; b < x.dim(0); ++b) {
    const double* src = x.ptr() + b * k;
    Eigen::MatrixXd Z(n_samples, n_seg + 1);
    Eigen::VectorXd y(n_samples), w(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
      Z(s, 0) = 1.0;
      for (std::size_t j = 0; j < n_seg; ++j) Z(s, j + 1) = (s == 0 || coin(rng)) ? 1.0 : 0.0;
    }

    for (std::size_t start = 0; start < n_samples; start += opt.chunk) {
      const std::size_t m = std::min(opt.chunk, n_samples - start);
      Shape s = item;
      s.insert(s.begin(), m);
      Tensor batch(s);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t i = 0; i < k; ++i)
          batch[r * k + i] = Z(start + r, seg[i] + 1) != 0.0 ? src[i] : opt.baseline;
      const Tensor out = D.forward(batch, false);
      if (out.item_size() != 1) throw ShapeError("explain_lime", "discriminator must produce one value per item");
      for (std::size_t r = 0; r < m; ++r) y(start + r) = out[r];
    }

    for (std::size_t s = 0; s < n_samples; ++s) {
      const double on = Z.row(s).tail(n_seg).sum();
      const double d = on > 0 ? 1.0 - std::sqrt(on / static_cast<double>(n_seg)) : 1.0;
      w(s) = std::sqrt(std::exp(-(d * d) / (opt.kernel_width * opt.kernel_width)));
    }

    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd A = sw.asDiagonal() * Z;
    const Eigen::VectorXd rhs = sw.asDiagonal() * y;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    cod.setThreshold(1e-12);
    if (cod.rank() < static_cast<Eigen::Index>(n_seg + 1)) res.least_norm = true;
    const Eigen::VectorXd beta = cod.solve(rhs);

    res.intercepts.push_back(beta(0));
    res.coefficients.emplace_back(beta.data() + 1, beta.data() + 1 + n_seg);
    for (std::size_t i = 0; i < k; ++i) res.attribution[b * k + i] = beta(seg[i] + 1);
  }
  return res;
}

// --------------------------------------------------------------------------
// DeepLIFT / DeepSHAP

/// DeepLIFT rescale-rule contributions of each input element to D's output
/// difference against every reference, averaged over references:
///   Σ_i C_i = D(x) − mean_r D(r_r)  (per batch item).
inline Tensor explain_deepshap(Network& D, const Tensor& x, const ReferenceSet& refs) {
  if (refs.size() == 0) throw ShapeError("explain_deepshap", "empty reference set");
  if (refs.item_shape() != x.item_shape())
    throw ShapeError("explain_deepshap references", x.item_shape(), refs.item_shape());

  auto activations = [&](const Tensor& in) {
    std::vector<Tensor> acts{in};
    for (std::size_t i = 0; i < D.size(); ++i) acts.push_back(D.layer(i).forward(acts.back(), false));
    return acts;
  };
  const std::vector<Tensor> ref_acts = activations(refs.inputs());
  const std::vector<Tensor> x_acts = activations(x);  // leaves x's caches in place
  Tensor total(x.shape());

  for (std::size_t r = 0; r < refs.size(); ++r) {
    auto ref_value = [&](std::size_t layer, std::size_t flat) {
      const Tensor& a = ref_acts[layer];
      return a[r * a.item_size() + flat % a.item_size()];
    };
    Tensor m(x_acts.back().shape(), 1.0);
    for (std::size_t i = D.size(); i-- > 0;) {
      Layer& layer = D.layer(i);
      switch (layer.attribution_rule()) {
        case AttributionRule::linear:
          m = layer.backward(m, false);
          break;
        case AttributionRule::elementwise: {
          const Tensor& xin = x_acts[i];
          const Tensor& xout = x_acts[i + 1];
          for (std::size_t j = 0; j < m.size(); ++j) {
            const double dx = xin[j] - ref_value(i, j);
            const double mult = std::abs(dx) > 1e-12 ? (xout[j] - ref_value(i + 1, j)) / dx
                                                     : layer.derivative(0.5 * (xin[j] + ref_value(i, j)));
            m[j] *= mult;
          }
          break;
        }
        case AttributionRule::unsupported:
          throw Error("unsupported_layer", "explain_deepshap: no rescale rule for " + layer.describe());
      }
    }
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += m[j] * (x[j] - ref_value(0, j));
  }
  total *= 1.0 / static_cast<double>(refs.size());
  if (!total.all_finite()) throw NumericError("explain_deepshap", "non-finite attribution");
  return total;
}

// --------------------------------------------------------------------------
// Batch mask construction used during generator training

struct ExplainerConfig {
  ExplainerKind kind = ExplainerKind::saliency;
  std::size_t lime_samples = 100;
  LimeOptions lime;
  ReferenceSet references;
};

/// Explanation masks for a batch of generated examples, one per item, with
/// the multi-channel rule applied so every mask matches the example shape.
inline Tensor explain_batch(Network& D, const Tensor& x, const ExplainerConfig& cfg, std::uint64_t seed) {
  Tensor raw;
  switch (cfg.kind) {
    case ExplainerKind::saliency: raw = explain_saliency(D, x); break;
    case ExplainerKind::lime: raw = explain_lime(D, x, cfg.lime_samples, seed, cfg.lime).attribution; break;
    case ExplainerKind::deepshap: raw = explain_deepshap(D, x, cfg.references); break;
  }
  return normalize_batch(collapse_channels(raw));
}

}  // namespace xaigan
