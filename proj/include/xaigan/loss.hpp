#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "xaigan/tensor.hpp"

namespace xaigan {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // dL/d(prediction), same shape as the prediction
};

namespace detail {
constexpr double kProbEps = 1e-12;
}

/// Binary cross-entropy of probabilities `p` (shape (N,1) or (N)) against a
/// constant label, averaged over the batch. Probabilities are clamped to
/// [1e-12, 1 - 1e-12].
inline LossResult bce(const Tensor& p, double label) {
  LossResult r{0.0, Tensor(p.shape())};
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], detail::kProbEps, 1.0 - detail::kProbEps);
    r.value -= label * std::log(q) + (1.0 - label) * std::log(1.0 - q);
    r.grad[i] = (-label / q + (1.0 - label) / (1.0 - q)) / n;
  }
  r.value /= n;
  return r;
}

/// Row-wise softmax of (N,K) logits.
inline Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape());
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.ptr() + i * k;
    const double m = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += out[i * k + j] = std::exp(row[j] - m);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= s;
  }
  return out;
}

/// Softmax cross-entropy of (N,K) logits against class ids, batch-averaged.
inline LossResult cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || labels.size() != logits.dim(0))
    throw ShapeError("cross_entropy", "logits " + shape_str(logits.shape()) + " vs " +
                                          std::to_string(labels.size()) + " labels");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  LossResult r{0.0, softmax(logits)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= k) throw ShapeError("cross_entropy", "label " + std::to_string(y) + " out of range");
    r.value -= std::log(std::max(r.grad[i * k + y], detail::kProbEps));
    r.grad[i * k + y] -= 1.0;
  }
  r.value /= static_cast<double>(n);
  r.grad *= 1.0 / static_cast<double>(n);
  return r;
}

}  // namespace xaigan
