#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "xaigan/loss.hpp"
#include "xaigan/network.hpp"

namespace xaigan {

using LossFn = std::function<LossResult(const Tensor& output)>;

struct GradCheckOptions {
  double step = 1e-5;
  bool training = true;
  bool check_input = true;
  /// Coordinates checked per tensor; 0 checks all of them. Larger tensors
  /// are sampled without replacement using `sample_seed`.
  std::size_t max_checks_per_tensor = 0;
  std::uint64_t sample_seed = 1;
  std::uint64_t dropout_seed = 99;
  /// Where the one-sided slopes disagree (a ReLU, leaky-ReLU or max-pool
  /// switch lies within one step) the analytic value is also compared with
  /// each one-sided slope, and the step is divided by 10 and the probe
  /// repeated, up to `kink_refinements` times. The best match is kept.
  bool one_sided_at_kinks = true;
  double kink_tolerance = 1e-4;
  std::size_t kink_refinements = 2;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[<index>]" or "input[<index>]"
  std::size_t checked = 0;
  std::size_t kinks = 0;  // coordinates judged by a one-sided slope
};

inline double relative_error(double analytic, double numeric) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) return std::numeric_limits<double>::infinity();
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Function values at x - h, x and x + h along one coordinate.
struct FdProbe {
  double down, mid, up, step;

  double central() const { return (up - down) / (2 * step); }
  double forward() const { return (up - mid) / step; }
  double backward() const { return (mid - down) / step; }
  bool kink(double tol) const {
    const double f = forward(), b = backward();
    return std::abs(f - b) > tol * std::max({std::abs(f), std::abs(b), 1e-8});
  }
};

/// Relative error of `analytic` against the probe; see GradCheckOptions.
inline double probe_error(double analytic, const FdProbe& p, bool one_sided_at_kinks, double tol, bool* kink = nullptr) {
  const double central = relative_error(analytic, p.central());
  const bool k = one_sided_at_kinks && p.kink(tol);
  if (kink) *kink = k;
  if (!k) return central;
  return std::min({central, relative_error(analytic, p.forward()), relative_error(analytic, p.backward())});
}

/// Random linear functional of the output, L = Σ w_i y_i, averaged over the
/// batch. Gives every output coordinate an O(1) weight for gradient checks.
inline LossFn random_projection_loss(const Shape& output_shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = Tensor::normal(output_shape, rng);
  return [w](const Tensor& y) {
    if (y.shape() != w.shape()) throw ShapeError("random_projection_loss", w.shape(), y.shape());
    const double n = static_cast<double>(y.dim(0));
    LossResult r{0.0, w * (1.0 / n)};
    for (std::size_t i = 0; i < y.size(); ++i) r.value += w[i] * y[i] / n;
    return r;
  };
}

/// Compares backward() against central differences of `loss`. Stochastic
/// layers are reseeded before every evaluation so each forward sees the
/// same dropout masks.
inline GradCheckReport gradient_check(Network& net, const Tensor& input, const LossFn& loss,
                                      const GradCheckOptions& opt = {}) {
  GradCheckReport report;
  auto eval = [&](const Tensor& x) {
    net.reseed(opt.dropout_seed);
    return loss(net.forward(x, opt.training)).value;
  };

  net.zero_grad();
  net.reseed(opt.dropout_seed);
  const Tensor out = net.forward(input, opt.training);
  const LossResult base = loss(out);
  const Tensor dinput = net.backward(base.grad, true);

  std::mt19937_64 pick(opt.sample_seed);
  auto indices = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (opt.max_checks_per_tensor && n > opt.max_checks_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(opt.max_checks_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    return idx;
  };
  auto record = [&](double analytic, auto&& value_at, const std::string& label, std::size_t i) {
    double h = opt.step;
    FdProbe probe{value_at(-h), base.value, value_at(h), h};
    bool kink = false;
    double e = probe_error(analytic, probe, opt.one_sided_at_kinks, opt.kink_tolerance, &kink);
    ++report.checked;
    report.kinks += kink;
    for (std::size_t r = 0; kink && r < opt.kink_refinements; ++r) {
      h /= 10;
      probe = {value_at(-h), base.value, value_at(h), h};
      e = std::min(e, probe_error(analytic, probe, true, opt.kink_tolerance, &kink));
    }
    if (e > report.max_rel_error || std::isnan(e)) {
      report.max_rel_error = std::isnan(e) ? std::numeric_limits<double>::infinity() : e;
      report.worst = label + "[" + std::to_string(i) + "]";
    }
  };

  for (ParamRef& p : net.params()) {
    const Tensor analytic = *p.grad;
    for (std::size_t i : indices(p.value->size())) {
      const double orig = (*p.value)[i];
      auto value_at = [&](double d) {
        (*p.value)[i] = orig + d;
        const double v = eval(input);
        (*p.value)[i] = orig;
        return v;
      };
      record(analytic[i], value_at, p.name, i);
    }
  }

  if (opt.check_input) {
    Tensor x = input;
    for (std::size_t i : indices(x.size())) {
      const double orig = x[i];
      auto value_at = [&](double d) {
        x[i] = orig + d;
        const double v = eval(x);
        x[i] = orig;
        return v;
      };
      record(dinput[i], value_at, "input", i);
    }
  }
  return report;
}

}  // namespace xaigan
