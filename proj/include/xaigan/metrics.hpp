#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xaigan/adam.hpp"
#include "xaigan/data.hpp"
#include "xaigan/loss.hpp"
#include "xaigan/models.hpp"

namespace xaigan {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n = 0;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

/// Feature-layer activations of `images` in eval mode, batched.
inline Tensor extract_features(Network& classifier, const Tensor& images, std::size_t batch = 256) {
  if (images.item_shape() != classifier.input_shape()) {
    Shape expected = classifier.input_shape();
    expected.insert(expected.begin(), images.rank() ? images.dim(0) : 0);
    throw ShapeError("extract_features", expected, images.shape());
  }
  const std::size_t n = images.dim(0);
  Tensor out;
  for (std::size_t s = 0; s < n; s += batch) {
    const Tensor f = feature_forward(classifier, images.slice(s, std::min(n, s + batch)));
    if (out.empty()) out = Tensor({n, f.dim(1)});
    std::copy(f.values().begin(), f.values().end(), out.values().begin() + s * f.dim(1));
  }
  return out;
}

/// Sample mean and unbiased covariance of (n × d) features.
inline GaussianStats gaussian_stats(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("gaussian_stats", "expected (n, d), got " + shape_str(features.shape()));
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (n < 2) throw ConfigError("gaussian_stats", "need at least 2 samples, got " + std::to_string(n));
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      features.ptr(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  GaussianStats s;
  s.n = n;
  s.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

namespace detail {

constexpr double kNegEigTol = 1e-8;

using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Symmetric PSD square root via eigendecomposition; eigenvalues in
/// (-tol, 0) are clamped to zero, anything more negative is an error.
/// Eigenvalues below the numerical-rank floor n·ε·max|λ| (double ε) are
/// also zeroed.
template <class Matrix>
Matrix psd_sqrt(const Matrix& m, const char* what) {
  using Scalar = typename Matrix::Scalar;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Scalar(0.5) * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("frechet_distance", std::string(what) + ": eigendecomposition failed");
  auto ev = es.eigenvalues().eval();
  const Scalar scale = std::max(Scalar(1), ev.cwiseAbs().maxCoeff());
  const Scalar rank_floor = Scalar(ev.size()) * Scalar(std::numeric_limits<double>::epsilon()) * ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -Scalar(kNegEigTol) * scale)
      throw NumericError("frechet_distance", std::string(what) + " is not positive semi-definite (eigenvalue " +
                                                 std::to_string(static_cast<double>(ev(i))) + ")");
    ev(i) = ev(i) <= rank_floor ? Scalar(0) : std::sqrt(ev(i));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^{1/2}).
///
/// Tr((Σa Σb)^{1/2}) is taken from the symmetric similar matrix
/// Σa^{1/2} Σb Σa^{1/2}, which shares its eigenvalues with Σa Σb. The matrix
/// work runs in long double.
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim() || a.cov.rows() != b.cov.rows())
    throw ShapeError("frechet_distance", "dimension " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  for (const GaussianStats* s : {&a, &b})
    if ((s->cov - s->cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
      throw NumericError("frechet_distance", "covariance is not symmetric");

  using detail::MatrixXld;
  const MatrixXld ca = a.cov.cast<long double>(), cb = b.cov.cast<long double>();
  const MatrixXld sa = detail::psd_sqrt(ca, "covariance a");
  const MatrixXld inner = sa * cb * sa;
  const MatrixXld root = detail::psd_sqrt(inner, "product");
  const long double norm = inner.norm();
  if (norm > 0 && (root * root - inner).norm() > 1e-6L * norm)
    throw NumericError("frechet_distance", "matrix square root residual too large");

  const long double mean_term = (a.mean - b.mean).cast<long double>().squaredNorm();
  const long double fid = mean_term + ca.trace() + cb.trace() - 2.0L * root.trace();
  return std::max(0.0, static_cast<double>(fid));
}

// --------------------------------------------------------------------------
// Feature classifier

struct ClassifierOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double min_accuracy = 0.9;
};

struct TrainedClassifier {
  Network net;
  double accuracy = 0.0;         // on the held-out set
  bool low_accuracy = false;     // accuracy below ClassifierOptions::min_accuracy
};

inline double classification_accuracy(Network& net, const Dataset& ds, std::size_t batch = 256) {
  if (!ds.labels) throw ConfigError("classifier", "held-out dataset has no labels");
  std::size_t correct = 0;
  for (std::size_t s = 0; s < ds.size(); s += batch) {
    const std::size_t e = std::min(ds.size(), s + batch);
    const Tensor logits = net.forward(ds.images.slice(s, e), false);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < e - s; ++i) {
      const double* row = logits.ptr() + i * k;
      const auto pred = static_cast<int>(std::max_element(row, row + k) - row);
      correct += pred == (*ds.labels)[s + i];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

/// LeNet trained with softmax cross-entropy and Adam; deterministic per seed.
inline TrainedClassifier train_feature_classifier(const Dataset& train, const Dataset& heldout,
                                                  const ClassifierOptions& opt = {}) {
  if (!train.labels) throw ConfigError("classifier", "training dataset has no labels");
  const int max_label = *std::max_element(train.labels->begin(), train.labels->end());
  const auto classes = static_cast<std::size_t>(std::max(max_label + 1, 2));
  const Shape item = train.item_shape();
  TrainedClassifier out{build_lenet_classifier(classes, item.at(0), opt.seed)};

  AdamConfig acfg;
  acfg.lr = opt.lr;
  AdamState adam(acfg);
  std::mt19937_64 rng(derive_seed(opt.seed, 11));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += opt.batch_size) {
      const std::span<const std::size_t> idx(order.data() + s, std::min(opt.batch_size, order.size() - s));
      const Dataset b = train.subset(idx);
      out.net.zero_grad();
      const LossResult l = cross_entropy(out.net.forward(b.images, true), *b.labels);
      if (!std::isfinite(l.value)) throw NumericError("train_feature_classifier", "non-finite loss");
      out.net.backward(l.grad);
      adam_step(out.net, adam);
    }
  }
  out.accuracy = classification_accuracy(out.net, heldout);
  out.low_accuracy = out.accuracy < opt.min_accuracy;
  return out;
}

/// FID of generated images against fixed real-image statistics.
class FidEvaluator {
 public:
  FidEvaluator(Network classifier, const Tensor& real_images, std::size_t max_samples = 2048)
      : classifier_(std::move(classifier)), max_samples_(max_samples) {
    const Tensor real = real_images.dim(0) > max_samples ? real_images.slice(0, max_samples) : real_images;
    real_stats_ = gaussian_stats(extract_features(classifier_, real));
  }

  double operator()(const Tensor& generated) {
    const Tensor gen = generated.dim(0) > max_samples_ ? generated.slice(0, max_samples_) : generated;
    return frechet_distance(real_stats_, gaussian_stats(extract_features(classifier_, gen)));
  }

  std::size_t n_real() const { return real_stats_.n; }
  std::size_t feature_dim() const { return real_stats_.dim(); }
  std::size_t max_samples() const { return max_samples_; }
  const GaussianStats& real_stats() const { return real_stats_; }

 private:
  Network classifier_;
  std::size_t max_samples_;
  GaussianStats real_stats_;
};

// --------------------------------------------------------------------------

/// Wall-clock accumulator keyed by section label.
class Stopwatch {
 public:
  using Clock = std::chrono::steady_clock;

  class Scope {
   public:
    Scope(Stopwatch& sw, std::string label) : sw_(sw), label_(std::move(label)), start_(Clock::now()) {}
    ~Scope() { sw_.add(label_, std::chrono::duration<double>(Clock::now() - start_).count()); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Stopwatch& sw_;
    std::string label_;
    Clock::time_point start_;
  };

  Scope scope(std::string label) { return Scope(*this, std::move(label)); }
  void add(const std::string& label, double seconds) { totals_[label] += seconds; }
  double elapsed(const std::string& label) const {
    auto it = totals_.find(label);
    return it == totals_.end() ? 0.0 : it->second;
  }
  const std::map<std::string, double>& totals() const { return totals_; }

 private:
  std::map<std::string, double> totals_;
};

}  // namespace xaigan
