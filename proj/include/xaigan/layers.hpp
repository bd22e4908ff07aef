#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "xaigan/kernels.hpp"
#include "xaigan/tensor.hpp"

namespace xaigan {

enum class LayerKind {
  dense,
  conv2d,
  conv_transpose2d,
  batchnorm,
  dropout,
  leaky_relu,
  relu,
  tanh,
  sigmoid,
  max_pool,
  reshape,
};

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv_transpose2d: return "conv_transpose2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::dropout: return "dropout";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::reshape: return "reshape";
  }
  return "unknown";
}

/// A trainable tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// How DeepLIFT propagates multipliers through a layer.
enum class AttributionRule {
  linear,       // affine in the input: multipliers follow the input-gradient map
  elementwise,  // y_i = f(x_i): rescale rule
  unsupported,
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::string describe() const { return std::string(to_string(kind())); }

  /// Item shape (without the batch axis) produced for a given item input shape.
  virtual Shape output_shape(const Shape& in) const = 0;

  /// Batched forward pass. The input is cached for backward in both modes.
  virtual Tensor forward(const Tensor& x, bool training) = 0;

  /// Returns dL/dx for the cached input. When `param_grads` is set, dL/dθ is
  /// added into the gradient accumulators.
  virtual Tensor backward(const Tensor& grad_out, bool param_grads = true) = 0;

  virtual std::vector<ParamRef> params() { return {}; }
  /// Non-trainable state that must survive a checkpoint (grad is null).
  virtual std::vector<ParamRef> buffers() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual AttributionRule attribution_rule() const { return AttributionRule::linear; }
  virtual void reseed(std::uint64_t) {}

  /// Element-wise layers only.
  virtual double apply(double x) const { return x; }
  virtual double derivative(double x) const { (void)x; return 1.0; }

  bool has_cache() const noexcept { return cached_.has_value(); }
  const Tensor& cached_input() const {
    if (!cached_) throw StateError(describe() + ": backward called before forward");
    return *cached_;
  }

 protected:
  void cache(const Tensor& x) { cached_ = x; }
  void check_grad(const Tensor& grad_out, const Shape& expected_batch_shape) const {
    if (grad_out.shape() != expected_batch_shape)
      throw ShapeError(describe() + " backward", expected_batch_shape, grad_out.shape());
  }
  Shape batch_out_shape() const {
    Shape s = output_shape(cached_input().item_shape());
    s.insert(s.begin(), cached_input().dim(0));
    return s;
  }

  std::optional<Tensor> cached_;
};

// --------------------------------------------------------------------------
// Dense

class Dense final : public Layer {
 public:
  /// Weight and bias drawn from uniform(-1/sqrt(in), 1/sqrt(in)).
  Dense(std::size_t in, std::size_t out, std::mt19937_64& rng)
      : in_(in), out_(out), weight_({out, in}), bias_({out}), dweight_({out, in}), dbias_({out}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : weight_.values()) v = dist(rng);
    for (double& v : bias_.values()) v = dist(rng);
  }

  Dense(Tensor weight, Tensor bias)
      : in_(weight.dim(1)), out_(weight.dim(0)), weight_(std::move(weight)), bias_(std::move(bias)),
        dweight_(weight_.shape()), dbias_(bias_.shape()) {
    if (bias_.shape() != Shape{out_}) throw ShapeError("dense bias", Shape{out_}, bias_.shape());
  }

  LayerKind kind() const override { return LayerKind::dense; }
  std::string describe() const override {
    return "dense(" + std::to_string(in_) + "," + std::to_string(out_) + ")";
  }
  Shape output_shape(const Shape& in) const override {
    if (in != Shape{in_}) throw ShapeError(describe(), Shape{in_}, in);
    return {out_};
  }

  Tensor forward(const Tensor& x, bool) override {
    if (x.rank() != 2 || x.dim(1) != in_) throw ShapeError(describe(), Shape{x.rank() ? x.dim(0) : 0, in_}, x.shape());
    cache(x);
    const std::size_t n = x.dim(0);
    Tensor y({n, out_});
    for (std::size_t i = 0; i < n; ++i) std::copy(bias_.values().begin(), bias_.values().end(), y.ptr() + i * out_);
    kernels::gemm_nt(n, out_, in_, x.ptr(), weight_.ptr(), y.ptr());
    return y;
  }

  Tensor backward(const Tensor& g, bool param_grads) override {
    const Tensor& x = cached_input();
    check_grad(g, {x.dim(0), out_});
    const std::size_t n = x.dim(0);
    if (param_grads) {
      kernels::gemm_tn(out_, in_, n, g.ptr(), x.ptr(), dweight_.ptr());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < out_; ++o) dbias_[o] += g[i * out_ + o];
    }
    Tensor dx({n, in_});
    kernels::gemm_nn(n, in_, out_, g.ptr(), weight_.ptr(), dx.ptr());
    return dx;
  }

  std::vector<ParamRef> params() override {
    return {{"weight", &weight_, &dweight_}, {"bias", &bias_, &dbias_}};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_, out_;
  Tensor weight_, bias_, dweight_, dbias_;
};

// --------------------------------------------------------------------------
// Convolutions

namespace detail {

/// Range [lo, hi) of "small-grid" indices j whose "big-grid" partner
/// j*stride - pad + tap lies inside [0, big).
struct TapRange {
  std::ptrdiff_t lo, hi;
};

inline TapRange tap_range(std::ptrdiff_t small, std::ptrdiff_t big, std::ptrdiff_t stride,
                          std::ptrdiff_t pad, std::ptrdiff_t tap) {
  auto ceil_div = [](std::ptrdiff_t a, std::ptrdiff_t b) {
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
  };
  auto floor_div = [](std::ptrdiff_t a, std::ptrdiff_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
  };
  std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, ceil_div(pad - tap, stride));
  std::ptrdiff_t hi = std::min<std::ptrdiff_t>(small, floor_div(big - 1 + pad - tap, stride) + 1);
  return {lo, std::max(lo, hi)};
}

/// Visits every (small, big) pixel pair coupled through kernel tap (kh, kw):
/// big = small * stride - pad + tap, per axis.
template <class F>
void for_each_tap_pair(std::size_t small_h, std::size_t small_w, std::size_t big_h, std::size_t big_w,
                       std::size_t stride, std::size_t pad, std::size_t kh, std::size_t kw, F&& f) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  const TapRange rh = tap_range(small_h, big_h, s, p, kh);
  const TapRange rw = tap_range(small_w, big_w, s, p, kw);
  for (std::ptrdiff_t sh = rh.lo; sh < rh.hi; ++sh) {
    const std::ptrdiff_t bh = sh * s - p + static_cast<std::ptrdiff_t>(kh);
    for (std::ptrdiff_t sw = rw.lo; sw < rw.hi; ++sw) {
      const std::ptrdiff_t bw = sw * s - p + static_cast<std::ptrdiff_t>(kw);
      f(static_cast<std::size_t>(sh * static_cast<std::ptrdiff_t>(small_w) + sw),
        static_cast<std::size_t>(bh * static_cast<std::ptrdiff_t>(big_w) + bw));
    }
  }
}

}  // namespace detail

/// Weight initialization used by convolution layers.
enum class ConvInit {
  dcgan,    // normal(0, 0.02), zero bias
  fan_in,   // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad,
         std::mt19937_64& rng, ConvInit init = ConvInit::dcgan)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
        weight_({out_ch, in_ch, kernel, kernel}), bias_({out_ch}), dweight_(weight_.shape()), dbias_({out_ch}) {
    if (stride == 0) throw ShapeError("conv2d", "stride must be positive");
    init_params(rng, init, in_ch * kernel * kernel);
  }

  LayerKind kind() const override { return LayerKind::conv2d; }
  std::string describe() const override {
    return "conv2d(" + std::to_string(in_ch_) + "->" + std::to_string(out_ch_) + ",k" + std::to_string(k_) +
           ",s" + std::to_string(stride_) + ",p" + std::to_string(pad_) + ")";
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != in_ch_)
      throw ShapeError(describe(), Shape{in_ch_, in.size() > 1 ? in[1] : 0, in.size() > 2 ? in[2] : 0}, in);
    if (in[1] + 2 * pad_ < k_ || in[2] + 2 * pad_ < k_)
      throw ShapeError(describe(), "input " + shape_str(in) + " smaller than kernel");
    return {out_ch_, (in[1] + 2 * pad_ - k_) / stride_ + 1, (in[2] + 2 * pad_ - k_) / stride_ + 1};
  }

  Tensor forward(const Tensor& x, bool) override {
    if (x.rank() != 4) throw ShapeError(describe(), "expected (N,C,H,W), got " + shape_str(x.shape()));
    const Shape os = output_shape(x.item_shape());
    cache(x);
    const std::size_t n = x.dim(0), ih = x.dim(2), iw = x.dim(3), oh = os[1], ow = os[2];
    Tensor y({n, out_ch_, oh, ow});
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        double* out = y.ptr() + (b * out_ch_ + oc) * oh * ow;
        std::fill(out, out + oh * ow, bias_[oc]);
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          const double* in = x.ptr() + (b * in_ch_ + ic) * ih * iw;
          for (std::size_t kh = 0; kh < k_; ++kh)
            for (std::size_t kw = 0; kw < k_; ++kw) {
              const double w = weight_[((oc * in_ch_ + ic) * k_ + kh) * k_ + kw];
              detail::for_each_tap_pair(oh, ow, ih, iw, stride_, pad_, kh, kw,
                                        [&](std::size_t o, std::size_t i) { out[o] += w * in[i]; });
            }
        }
      }
    return y;
  }

  Tensor backward(const Tensor& g, bool param_grads) override {
    const Tensor& x = cached_input();
    check_grad(g, batch_out_shape());
    const std::size_t n = x.dim(0), ih = x.dim(2), iw = x.dim(3), oh = g.dim(2), ow = g.dim(3);
    Tensor dx(x.shape());
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        const double* go = g.ptr() + (b * out_ch_ + oc) * oh * ow;
        if (param_grads)
          for (std::size_t o = 0; o < oh * ow; ++o) dbias_[oc] += go[o];
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          const double* in = x.ptr() + (b * in_ch_ + ic) * ih * iw;
          double* din = dx.ptr() + (b * in_ch_ + ic) * ih * iw;
          for (std::size_t kh = 0; kh < k_; ++kh)
            for (std::size_t kw = 0; kw < k_; ++kw) {
              const std::size_t widx = ((oc * in_ch_ + ic) * k_ + kh) * k_ + kw;
              const double w = weight_[widx];
              double dw = 0.0;
              detail::for_each_tap_pair(oh, ow, ih, iw, stride_, pad_, kh, kw, [&](std::size_t o, std::size_t i) {
                din[i] += w * go[o];
                dw += go[o] * in[i];
              });
              if (param_grads) dweight_[widx] += dw;
            }
        }
      }
    return dx;
  }

  std::vector<ParamRef> params() override {
    if (!has_bias_) return {{"weight", &weight_, &dweight_}};
    return {{"weight", &weight_, &dweight_}, {"bias", &bias_, &dbias_}};
  }
  /// Pins the bias at zero and drops it from params().
  void disable_bias() {
    has_bias_ = false;
    bias_.fill(0.0);
  }
  bool has_bias() const noexcept { return has_bias_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  void init_params(std::mt19937_64& rng, ConvInit init, std::size_t fan_in) {
    if (init == ConvInit::dcgan) {
      std::normal_distribution<double> dist(0.0, 0.02);
      for (double& v : weight_.values()) v = dist(rng);
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : weight_.values()) v = dist(rng);
      for (double& v : bias_.values()) v = dist(rng);
    }
  }

  std::size_t in_ch_, out_ch_, k_, stride_, pad_;
  Tensor weight_, bias_, dweight_, dbias_;
  bool has_bias_ = true;
};

/// Transposed convolution; weight layout (in_ch, out_ch, k, k).
/// Output size: (in - 1) * stride - 2 * pad + k.
class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad,
                  std::mt19937_64& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
        weight_({in_ch, out_ch, kernel, kernel}), bias_({out_ch}), dweight_(weight_.shape()), dbias_({out_ch}) {
    if (stride == 0) throw ShapeError("conv_transpose2d", "stride must be positive");
    std::normal_distribution<double> dist(0.0, 0.02);
    for (double& v : weight_.values()) v = dist(rng);
  }

  LayerKind kind() const override { return LayerKind::conv_transpose2d; }
  std::string describe() const override {
    return "conv_transpose2d(" + std::to_string(in_ch_) + "->" + std::to_string(out_ch_) + ",k" +
           std::to_string(k_) + ",s" + std::to_string(stride_) + ",p" + std::to_string(pad_) + ")";
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != in_ch_)
      throw ShapeError(describe(), Shape{in_ch_, in.size() > 1 ? in[1] : 0, in.size() > 2 ? in[2] : 0}, in);
    const auto out = [&](std::size_t i) -> std::size_t {
      const std::ptrdiff_t v = static_cast<std::ptrdiff_t>((i - 1) * stride_ + k_) - 2 * static_cast<std::ptrdiff_t>(pad_);
      if (v <= 0) throw ShapeError(describe(), "non-positive output size for input " + shape_str(in));
      return static_cast<std::size_t>(v);
    };
    return {out_ch_, out(in[1]), out(in[2])};
  }

  Tensor forward(const Tensor& x, bool) override {
    if (x.rank() != 4) throw ShapeError(describe(), "expected (N,C,H,W), got " + shape_str(x.shape()));
    const Shape os = output_shape(x.item_shape());
    cache(x);
    const std::size_t n = x.dim(0), ih = x.dim(2), iw = x.dim(3), oh = os[1], ow = os[2];
    Tensor y({n, out_ch_, oh, ow});
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        double* out = y.ptr() + (b * out_ch_ + oc) * oh * ow;
        std::fill(out, out + oh * ow, bias_[oc]);
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          const double* in = x.ptr() + (b * in_ch_ + ic) * ih * iw;
          for (std::size_t kh = 0; kh < k_; ++kh)
            for (std::size_t kw = 0; kw < k_; ++kw) {
              const double w = weight_[((ic * out_ch_ + oc) * k_ + kh) * k_ + kw];
              detail::for_each_tap_pair(ih, iw, oh, ow, stride_, pad_, kh, kw,
                                        [&](std::size_t i, std::size_t o) { out[o] += w * in[i]; });
            }
        }
      }
    return y;
  }

  Tensor backward(const Tensor& g, bool param_grads) override {
    const Tensor& x = cached_input();
    check_grad(g, batch_out_shape());
    const std::size_t n = x.dim(0), ih = x.dim(2), iw = x.dim(3), oh = g.dim(2), ow = g.dim(3);
    Tensor dx(x.shape());
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        const double* go = g.ptr() + (b * out_ch_ + oc) * oh * ow;
        if (param_grads)
          for (std::size_t o = 0; o < oh * ow; ++o) dbias_[oc] += go[o];
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          const double* in = x.ptr() + (b * in_ch_ + ic) * ih * iw;
          double* din = dx.ptr() + (b * in_ch_ + ic) * ih * iw;
          for (std::size_t kh = 0; kh < k_; ++kh)
            for (std::size_t kw = 0; kw < k_; ++kw) {
              const std::size_t widx = ((ic * out_ch_ + oc) * k_ + kh) * k_ + kw;
              const double w = weight_[widx];
              double dw = 0.0;
              detail::for_each_tap_pair(ih, iw, oh, ow, stride_, pad_, kh, kw, [&](std::size_t i, std::size_t o) {
                din[i] += w * go[o];
                dw += go[o] * in[i];
              });
              if (param_grads) dweight_[widx] += dw;
            }
        }
      }
    return dx;
  }

  std::vector<ParamRef> params() override {
    if (!has_bias_) return {{"weight", &weight_, &dweight_}};
    return {{"weight", &weight_, &dweight_}, {"bias", &bias_, &dbias_}};
  }
  /// Pins the bias at zero and drops it from params().
  void disable_bias() {
    has_bias_ = false;
    bias_.fill(0.0);
  }
  bool has_bias() const noexcept { return has_bias_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

 private:
  std::size_t in_ch_, out_ch_, k_, stride_, pad_;
  Tensor weight_, bias_, dweight_, dbias_;
  bool has_bias_ = true;
};

// --------------------------------------------------------------------------
// BatchNorm

/// Per-channel batch normalization over (N,C) or (N,C,H,W) inputs.
/// Training mode normalizes with biased batch statistics and updates the
/// running estimates (unbiased variance) with the given momentum.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(std::size_t channels, std::mt19937_64& rng, double momentum = 0.1, double eps = 1e-5)
      : channels_(channels), momentum_(momentum), eps_(eps), gamma_({channels}), beta_({channels}),
        dgamma_({channels}), dbeta_({channels}), running_mean_({channels}, 0.0), running_var_({channels}, 1.0) {
    std::normal_distribution<double> dist(1.0, 0.02);
    for (double& v : gamma_.values()) v = dist(rng);
  }

  LayerKind kind() const override { return LayerKind::batchnorm; }
  std::string describe() const override { return "batchnorm(" + std::to_string(channels_) + ")"; }

  Shape output_shape(const Shape& in) const override {
    if (in.empty() || in[0] != channels_ || (in.size() != 1 && in.size() != 3))
      throw ShapeError(describe(), "expected (C) or (C,H,W) with C=" + std::to_string(channels_) + ", got " +
                                       shape_str(in));
    return in;
  }

  Tensor forward(const Tensor& x, bool training) override {
    output_shape(x.item_shape());
    cache(x);
    const std::size_t n = x.dim(0), plane = x.item_size() / channels_;
    const double count = static_cast<double>(n * plane);
    training_ = training;
    mean_.assign(channels_, 0.0);
    inv_std_.assign(channels_, 0.0);
    Tensor y(x.shape());
    xhat_ = Tensor(x.shape());
    for (std::size_t c = 0; c < channels_; ++c) {
      double mean, var;
      if (training) {
        double s = 0.0;
        for_channel(n, plane, c, [&](std::size_t i) { s += x[i]; });
        mean = s / count;
        double ss = 0.0;
        for_channel(n, plane, c, [&](std::size_t i) { ss += (x[i] - mean) * (x[i] - mean); });
        var = ss / count;
        const double unbiased = count > 1 ? ss / (count - 1) : var;
        running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * unbiased;
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      mean_[c] = mean;
      inv_std_[c] = inv;
      for_channel(n, plane, c, [&](std::size_t i) {
        xhat_[i] = (x[i] - mean) * inv;
        y[i] = gamma_[c] * xhat_[i] + beta_[c];
      });
    }
    return y;
  }

  Tensor backward(const Tensor& g, bool param_grads) override {
    const Tensor& x = cached_input();
    check_grad(g, x.shape());
    const std::size_t n = x.dim(0), plane = x.item_size() / channels_;
    const double count = static_cast<double>(n * plane);
    Tensor dx(x.shape());
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for_channel(n, plane, c, [&](std::size_t i) {
        sum_g += g[i];
        sum_gx += g[i] * xhat_[i];
      });
      if (param_grads) {
        dgamma_[c] += sum_gx;
        dbeta_[c] += sum_g;
      }
      const double k = gamma_[c] * inv_std_[c];
      if (training_) {
        for_channel(n, plane, c, [&](std::size_t i) {
          dx[i] = k * (g[i] - sum_g / count - xhat_[i] * sum_gx / count);
        });
      } else {
        for_channel(n, plane, c, [&](std::size_t i) { dx[i] = k * g[i]; });
      }
    }
    return dx;
  }

  std::vector<ParamRef> params() override {
    return {{"gamma", &gamma_, &dgamma_}, {"beta", &beta_, &dbeta_}};
  }
  std::vector<ParamRef> buffers() override {
    return {{"running_mean", &running_mean_, nullptr}, {"running_var", &running_var_, nullptr}};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }
  // Running statistics make eval mode affine; batch statistics couple examples.
  AttributionRule attribution_rule() const override { return AttributionRule::linear; }

  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  double eps() const { return eps_; }

 private:
  template <class F>
  void for_channel(std::size_t n, std::size_t plane, std::size_t c, F&& f) const {
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) f(base + i);
    }
  }

  std::size_t channels_;
  double momentum_, eps_;
  Tensor gamma_, beta_, dgamma_, dbeta_, running_mean_, running_var_;
  bool training_ = false;
  std::vector<double> mean_, inv_std_;
  Tensor xhat_;
};

// --------------------------------------------------------------------------
// Dropout

/// Inverted dropout: survivors are scaled by 1/(1-rate) in training mode;
/// eval mode is the identity.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate, std::uint64_t seed = 0) : rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout.rate", "must be in [0, 1)");
  }

  LayerKind kind() const override { return LayerKind::dropout; }
  std::string describe() const override { return "dropout(" + std::to_string(rate_) + ")"; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, bool training) override {
    cache(x);
    training_ = training;
    if (!training || rate_ == 0.0) return x;
    mask_ = Tensor(x.shape());
    std::bernoulli_distribution keep(1.0 - rate_);
    const double scale = 1.0 / (1.0 - rate_);
    Tensor y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = keep(rng_) ? scale : 0.0;
      y[i] *= mask_[i];
    }
    return y;
  }

  Tensor backward(const Tensor& g, bool) override {
    check_grad(g, cached_input().shape());
    if (!training_ || rate_ == 0.0) return g;
    return g.hadamard(mask_);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }
  // Identity at inference, which is where attributions are computed.
  AttributionRule attribution_rule() const override { return AttributionRule::linear; }

  double rate() const { return rate_; }
  const Tensor& mask() const { return mask_; }

 private:
  double rate_;
  std::mt19937_64 rng_;
  bool training_ = false;
  Tensor mask_;
};

// --------------------------------------------------------------------------
// Element-wise activations

class Elementwise : public Layer {
 public:
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor forward(const Tensor& x, bool) override {
    cache(x);
    return x.map([this](double v) { return apply(v); });
  }

  Tensor backward(const Tensor& g, bool) override {
    const Tensor& x = cached_input();
    check_grad(g, x.shape());
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= derivative(x[i]);
    return dx;
  }

  AttributionRule attribution_rule() const override { return AttributionRule::elementwise; }
};

class LeakyRelu final : public Elementwise {
 public:
  explicit LeakyRelu(double slope = 0.2) : slope_(slope) {}
  LayerKind kind() const override { return LayerKind::leaky_relu; }
  double apply(double x) const override { return x > 0 ? x : slope_ * x; }
  double derivative(double x) const override { return x > 0 ? 1.0 : slope_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LeakyRelu>(*this); }

 private:
  double slope_;
};

class Relu final : public Elementwise {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  double apply(double x) const override { return x > 0 ? x : 0.0; }
  double derivative(double x) const override { return x > 0 ? 1.0 : 0.0; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

class Tanh final : public Elementwise {
 public:
  LayerKind kind() const override { return LayerKind::tanh; }
  double apply(double x) const override { return std::tanh(x); }
  double derivative(double x) const override {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Tanh>(*this); }
};

class Sigmoid final : public Elementwise {
 public:
  LayerKind kind() const override { return LayerKind::sigmoid; }
  double apply(double x) const override {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }
  double derivative(double x) const override {
    const double s = apply(x);
    return s * (1.0 - s);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }
};

// --------------------------------------------------------------------------
// Shape plumbing

class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(std::size_t size = 2) : size_(size) {}

  LayerKind kind() const override { return LayerKind::max_pool; }
  std::string describe() const override { return "max_pool(" + std::to_string(size_) + ")"; }
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[1] < size_ || in[2] < size_)
      throw ShapeError(describe(), "expected (C,H,W) with H,W >= " + std::to_string(size_) + ", got " + shape_str(in));
    return {in[0], in[1] / size_, in[2] / size_};
  }

  Tensor forward(const Tensor& x, bool) override {
    if (x.rank() != 4) throw ShapeError(describe(), "expected (N,C,H,W), got " + shape_str(x.shape()));
    const Shape os = output_shape(x.item_shape());
    cache(x);
    const std::size_t planes = x.dim(0) * x.dim(1), ih = x.dim(2), iw = x.dim(3), oh = os[1], ow = os[2];
    Tensor y({x.dim(0), os[0], oh, ow});
    argmax_.assign(y.size(), 0);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          std::size_t best = p * ih * iw + (i * size_) * iw + j * size_;
          for (std::size_t a = 0; a < size_; ++a)
            for (std::size_t b = 0; b < size_; ++b) {
              const std::size_t idx = p * ih * iw + (i * size_ + a) * iw + (j * size_ + b);
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t o = (p * oh + i) * ow + j;
          y[o] = x[best];
          argmax_[o] = best;
        }
    return y;
  }

  Tensor backward(const Tensor& g, bool) override {
    const Tensor& x = cached_input();
    check_grad(g, batch_out_shape());
    Tensor dx(x.shape());
    for (std::size_t o = 0; o < g.size(); ++o) dx[argmax_[o]] += g[o];
    return dx;
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }
  AttributionRule attribution_rule() const override { return AttributionRule::unsupported; }

 private:
  std::size_t size_;
  std::vector<std::size_t> argmax_;
};

/// Reinterprets each batch item with a new item shape.
class Reshape final : public Layer {
 public:
  explicit Reshape(Shape item_shape) : item_shape_(std::move(item_shape)) {}

  LayerKind kind() const override { return LayerKind::reshape; }
  std::string describe() const override { return "reshape" + shape_str(item_shape_); }
  Shape output_shape(const Shape& in) const override {
    if (shape_numel(in) != shape_numel(item_shape_)) throw ShapeError(describe(), item_shape_, in);
    return item_shape_;
  }

  Tensor forward(const Tensor& x, bool) override {
    output_shape(x.item_shape());
    cache(x);
    Shape s = item_shape_;
    s.insert(s.begin(), x.dim(0));
    return x.reshaped(std::move(s));
  }

  Tensor backward(const Tensor& g, bool) override {
    const Tensor& x = cached_input();
    check_grad(g, batch_out_shape());
    return g.reshaped(x.shape());
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  Shape item_shape_;
};

}  // namespace xaigan
