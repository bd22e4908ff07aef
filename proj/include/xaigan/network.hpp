#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "xaigan/layers.hpp"

namespace xaigan {

/// Ordered stack of layers with a fixed per-item input shape.
class Network {
 public:
  Network() = default;
  explicit Network(Shape input_shape) : input_shape_(std::move(input_shape)) {}

  Network(const Network& o) : input_shape_(o.input_shape_), feature_layer_(o.feature_layer_) {
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& o) {
    if (this != &o) *this = Network(o);
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  template <class L, class... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  const Shape& input_shape() const noexcept { return input_shape_; }
  Shape output_shape() const { return shape_after(layers_.size()); }

  /// Item shape after the first `count` layers.
  Shape shape_after(std::size_t count) const {
    Shape s = input_shape_;
    for (std::size_t i = 0; i < count; ++i) s = layers_[i]->output_shape(s);
    return s;
  }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  /// Marks the output of layer `index` as the network's feature map.
  void set_feature_layer(std::size_t index) { feature_layer_ = index; }
  std::size_t feature_layer() const { return feature_layer_; }

  Tensor forward(const Tensor& x, bool training) { return forward_range(x, 0, layers_.size(), training); }

  /// Runs layers [0, end).
  Tensor forward_to(const Tensor& x, std::size_t end, bool training) {
    return forward_range(x, 0, end, training);
  }

  Tensor backward(const Tensor& grad_out, bool param_grads = true) {
    Tensor g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, param_grads);
    return g;
  }

  /// Parameters named "<layer index>.<kind>.<param>".
  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (ParamRef p : layers_[i]->params()) {
        p.name = std::to_string(i) + "." + std::string(to_string(layers_[i]->kind())) + "." + p.name;
        out.push_back(std::move(p));
      }
    return out;
  }

  /// Parameters followed by buffers; everything a checkpoint must carry.
  std::vector<ParamRef> state() {
    std::vector<ParamRef> out = params();
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (ParamRef p : layers_[i]->buffers()) {
        p.name = std::to_string(i) + "." + std::string(to_string(layers_[i]->kind())) + "." + p.name;
        out.push_back(std::move(p));
      }
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      for (const ParamRef& p : l->params()) n += p.value->size();
    return n;
  }

  void zero_grad() {
    for (ParamRef& p : params()) p.grad->fill(0.0);
  }

  /// Reseeds every stochastic layer; layer i gets seed + i.
  void reseed(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->reseed(seed + i);
  }

 private:
  Tensor forward_range(const Tensor& x, std::size_t begin, std::size_t end, bool training) {
    if (begin == 0 && x.item_shape() != input_shape_) {
      Shape expected = input_shape_;
      expected.insert(expected.begin(), x.rank() ? x.dim(0) : 0);
      throw ShapeError("network input", expected, x.shape());
    }
    Tensor h = x;
    for (std::size_t i = begin; i < end; ++i) h = layers_[i]->forward(h, training);
    return h;
  }

  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::size_t feature_layer_ = 0;
};

}  // namespace xaigan
