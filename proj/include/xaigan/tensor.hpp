#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "xaigan/error.hpp"

namespace xaigan {

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of doubles. The first dimension is the batch
/// dimension everywhere in the library.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_dims();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_numel(shape_))
      throw ShapeError("Tensor", "data length " + std::to_string(data_.size()) +
                                     " does not match shape " + shape_str(shape_));
  }

  static Tensor from(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Elements per batch item.
  std::size_t item_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }
  Shape item_shape() const { return Shape(shape_.begin() + 1, shape_.end()); }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size())
      throw ShapeError("reshape", "cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  /// Batch items [begin, end).
  Tensor slice(std::size_t begin, std::size_t end) const {
    Shape s = shape_;
    s[0] = end - begin;
    const std::size_t k = item_size();
    return Tensor(std::move(s), std::vector<double>(data_.begin() + begin * k, data_.begin() + end * k));
  }

  Tensor item(std::size_t n) const {
    Shape s = item_shape();
    s.insert(s.begin(), 1);
    return slice(n, n + 1).reshaped(std::move(s));
  }

  /// Gathers batch items by index.
  Tensor gather(std::span<const std::size_t> idx) const {
    Shape s = shape_;
    s[0] = idx.size();
    Tensor out(std::move(s));
    const std::size_t k = item_size();
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(data_.begin() + idx[i] * k, k, out.data_.begin() + i * k);
    return out;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

  Tensor& operator+=(const Tensor& o) {
    require_same(o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same(o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }

  /// Element-wise product.
  Tensor hadamard(const Tensor& o) const {
    require_same(o, "hadamard");
    Tensor out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] *= o.data_[i];
    return out;
  }

  template <class F>
  Tensor map(F&& f) const {
    Tensor out = *this;
    for (double& v : out.data_) v = f(v);
    return out;
  }

  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static Tensor normal(Shape shape, std::mt19937_64& rng, double mean = 0.0, double stddev = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : t.data_) v = dist(rng);
    return t;
  }

  static Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data_) v = dist(rng);
    return t;
  }

  /// Stacks equally shaped items along a new leading batch axis.
  static Tensor stack(std::span<const Tensor> items) {
    if (items.empty()) throw ShapeError("stack", "no items");
    Shape s = items[0].shape();
    s.insert(s.begin(), items.size());
    Tensor out(std::move(s));
    const std::size_t k = items[0].size();
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].shape() != items[0].shape())
        throw ShapeError("stack", items[0].shape(), items[i].shape());
      std::copy(items[i].data_.begin(), items[i].data_.end(), out.data_.begin() + i * k);
    }
    return out;
  }

  /// Concatenates along the batch axis.
  static Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.item_shape() != b.item_shape()) throw ShapeError("concat", a.shape(), b.shape());
    Shape s = a.shape();
    s[0] += b.shape()[0];
    std::vector<double> d = a.data_;
    d.insert(d.end(), b.data_.begin(), b.data_.end());
    return Tensor(std::move(s), std::move(d));
  }

 private:
  void check_dims() const {
    for (std::size_t d : shape_)
      if (d == 0) throw ShapeError("Tensor", "zero-sized dimension in " + shape_str(shape_));
  }
  void require_same(const Tensor& o, const char* where) const {
    if (shape_ != o.shape_) throw ShapeError(where, shape_, o.shape_);
  }

  Shape shape_;
  std::vector<double> data_;
};

}  // namespace xaigan
