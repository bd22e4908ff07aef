#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "xaigan/layers.hpp"
#include "xaigan/network.hpp"

namespace xaigan {

struct AdamConfig {
  double lr = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for a fixed list of parameters.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

/// One bias-corrected Adam update. Moments are lazily sized on the first
/// call; later calls must present the same parameter shapes.
inline void adam_step(std::span<const ParamRef> params, AdamState& state) {
  if (state.m.empty()) {
    for (const ParamRef& p : params) {
      state.m.emplace_back(p.value->shape());
      state.v.emplace_back(p.value->shape());
    }
  }
  if (state.m.size() != params.size())
    throw ShapeError("adam_step", "state holds " + std::to_string(state.m.size()) + " moments for " +
                                      std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value->shape() != state.m[i].shape())
      throw ShapeError("adam_step " + params[i].name, state.m[i].shape(), params[i].value->shape());
    if (params[i].grad->shape() != params[i].value->shape())
      throw ShapeError("adam_step grad " + params[i].name, params[i].value->shape(), params[i].grad->shape());
  }

  const AdamConfig& c = state.config;
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i].value;
    const Tensor& g = *params[i].grad;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      theta[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

inline void adam_step(Network& net, AdamState& state) {
  const std::vector<ParamRef> p = net.params();
  adam_step(p, state);
}

}  // namespace xaigan
