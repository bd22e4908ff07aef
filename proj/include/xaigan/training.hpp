#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xaigan/adam.hpp"
#include "xaigan/augment.hpp"
#include "xaigan/data.hpp"
#include "xaigan/explainers.hpp"
#include "xaigan/loss.hpp"
#include "xaigan/metrics.hpp"
#include "xaigan/models.hpp"

namespace xaigan {

struct TrainConfig {
  Architecture architecture = Architecture::fc;
  std::optional<ExplainerKind> explainer;  // nullopt: standard training
  double alpha = 0.2;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double lr = 0.0002;
  double data_fraction = 1.0;
  std::uint64_t seed = 0;
  bool diffaug = false;
  AugPolicy aug_policy = parse_aug_policy("color,translation,cutout");
  std::optional<std::size_t> xai_start_epoch;  // default epochs / 2
  std::size_t lime_samples = 100;
  std::size_t n_references = 8;
  std::size_t fid_every = 1;       // 0 disables FID
  std::size_t fid_samples = 2048;

  std::size_t xai_start() const { return xai_start_epoch.value_or(epochs / 2); }
  bool xai_active(std::size_t epoch) const { return explainer.has_value() && epoch >= xai_start(); }

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs", "must be positive");
    if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha", "must be a finite value >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
    if (!(data_fraction > 0.0 && data_fraction <= 1.0)) throw ConfigError("data_fraction", "must be in (0, 1]");
    if (xai_start() > epochs) throw ConfigError("xai_start_epoch", "must lie in [0, epochs]");
    if (n_references == 0) throw ConfigError("n_references", "must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  std::optional<double> fid;
  double seconds = 0.0;
  bool xai_active = false;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  bool aborted = false;
  std::string diagnostic;
};

/// Optimizer state of one adversarial pair.
struct GanOptimizers {
  AdamState generator;
  AdamState discriminator;

  explicit GanOptimizers(double lr = 0.0002) {
    AdamConfig c;
    c.lr = lr;
    c.beta1 = 0.9;
    c.beta2 = 0.999;
    generator = AdamState(c);
    discriminator = AdamState(c);
  }
};

/// Augmentation draws shared by the real and generated streams of one step.
struct StepAugmentation {
  const AugPolicy* policy = nullptr;
  AugDraws draws;

  Tensor apply(const Tensor& x) const { return policy ? diff_augment(x, *policy, draws) : x; }
  Tensor backward(const Tensor& g) const { return policy ? diff_augment_backward(g, *policy, draws) : g; }
};

inline void require_finite(double loss, const char* where) {
  if (!std::isfinite(loss)) throw NumericError(where, "non-finite loss");
}

/// One discriminator update: BCE(D(real), 1) + BCE(D(G(z)), 0), each
/// batch-averaged. Only D's parameters change.
inline double discriminator_step(GanPair& pair, const Tensor& real_batch, const Tensor& z_batch, AdamState& d_opt,
                                 const StepAugmentation& aug = {}) {
  if (real_batch.empty() || z_batch.empty()) throw ShapeError("discriminator_step", "empty batch");
  Network& D = pair.discriminator;
  const Tensor fake = pair.generator.forward(z_batch, true);

  D.zero_grad();
  const LossResult real_loss = bce(D.forward(aug.apply(real_batch), true), 1.0);
  require_finite(real_loss.value, "discriminator_step(real)");
  D.backward(real_loss.grad);
  const LossResult fake_loss = bce(D.forward(aug.apply(fake), true), 0.0);
  require_finite(fake_loss.value, "discriminator_step(fake)");
  D.backward(fake_loss.grad);
  adam_step(D, d_opt);
  return real_loss.value + fake_loss.value;
}

/// Explanation-guided gradient at the generator output: Δ + α·(Δ ∘ M).
inline Tensor modulate_gradient(const Tensor& delta, const Tensor& mask, double alpha) {
  if (mask.shape() != delta.shape()) throw ShapeError("modulate_gradient mask", delta.shape(), mask.shape());
  Tensor out = delta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = delta[i] + alpha * (delta[i] * mask[i]);
  return out;
}

/// Produces a mask batch for the generated examples; receives a per-call seed.
using MaskProvider = std::function<Tensor(Network& discriminator, const Tensor& generated, std::uint64_t seed)>;

inline MaskProvider make_mask_provider(ExplainerConfig cfg) {
  return [cfg = std::move(cfg)](Network& D, const Tensor& x, std::uint64_t seed) {
    return explain_batch(D, x, cfg, seed);
  };
}

struct GeneratorStepInfo {
  double g_loss = 0.0;
  Tensor output_grad;   // Δ_{G(z)} as returned by the discriminator
  Tensor applied_grad;  // gradient actually back-propagated through G
};

/// One generator update with the non-saturating loss BCE(D(G(z)), 1). When
/// `use_xai` is set, the output-layer gradient is modulated by the masks
/// from `masks` before back-propagating through G. Only G's parameters change.
inline GeneratorStepInfo generator_step(GanPair& pair, const Tensor& z_batch, bool use_xai, double alpha,
                                        const MaskProvider& masks, AdamState& g_opt, std::uint64_t mask_seed = 0,
                                        const StepAugmentation& aug = {}, Stopwatch* sw = nullptr) {
  if (use_xai && !masks) throw ConfigError("explainer", "use_xai requires an explainer");
  Network& G = pair.generator;
  Network& D = pair.discriminator;

  G.zero_grad();
  const Tensor fake = G.forward(z_batch, true);
  const LossResult loss = bce(D.forward(aug.apply(fake), true), 1.0);
  require_finite(loss.value, "generator_step");
  GeneratorStepInfo info{loss.value, aug.backward(D.backward(loss.grad, false)), {}};

  if (use_xai) {
    std::optional<Stopwatch::Scope> timing;
    if (sw) timing.emplace(*sw, "explain");
    const Tensor m = masks(D, fake, mask_seed);
    info.applied_grad = modulate_gradient(info.output_grad, m, alpha);
  } else {
    info.applied_grad = info.output_grad;
  }
  G.backward(info.applied_grad);
  adam_step(G, g_opt);
  return info;
}

using EpochSink = std::function<void(const EpochRecord&, GanPair&)>;

struct TrainResult {
  GanPair pair;
  TrainTrace trace;
  Stopwatch stopwatch;
};

/// Reference images for DeepLIFT: `count` dataset examples chosen by seed.
inline ReferenceSet pick_references(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(count, idx.size()));
  std::sort(idx.begin(), idx.end());
  return ReferenceSet(ds.images.gather(idx));
}

/// Fixed noise used to draw FID and sample-grid images for a seed.
inline Tensor evaluation_noise(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 7));
  return sample_noise(count, kNoiseDim, rng);
}

inline Tensor generate(Network& G, const Tensor& z, std::size_t batch = 256) {
  Tensor out;
  for (std::size_t s = 0; s < z.dim(0); s += batch) {
    const Tensor part = G.forward(z.slice(s, std::min(z.dim(0), s + batch)), false);
    out = out.empty() ? part : Tensor::concat(out, part);
  }
  return out;
}

/// Alternating D/G training over mini-batches. The explanation-guided branch
/// is active for epochs >= xai_start(). The dataset is used as given (apply
/// `subsample` beforehand). Deterministic per `config.seed`.
inline TrainResult train(const TrainConfig& config, const Dataset& dataset, FidEvaluator* fid = nullptr,
                         const EpochSink& sink = {}, const MaskProvider& custom_masks = {}) {
  config.validate();
  if (dataset.size() < config.batch_size)
    throw ConfigError("batch_size", "dataset of " + std::to_string(dataset.size()) + " examples is smaller than one batch");

  const Shape item = dataset.item_shape();
  TrainResult res{build_gan(config.architecture, derive_seed(config.seed, 1), item.at(0)), {}, {}};
  GanPair& pair = res.pair;
  if (pair.image_shape != item) throw ShapeError("train dataset", pair.image_shape, item);

  GanOptimizers opt(config.lr);
  std::mt19937_64 data_rng(derive_seed(config.seed, 2));
  std::mt19937_64 noise_rng(derive_seed(config.seed, 3));
  std::mt19937_64 aug_rng(derive_seed(config.seed, 4));

  MaskProvider masks = custom_masks;
  if (!masks && config.explainer) {
    ExplainerConfig ecfg;
    ecfg.kind = *config.explainer;
    ecfg.lime_samples = config.lime_samples;
    if (ecfg.kind == ExplainerKind::deepshap)
      ecfg.references = pick_references(dataset, config.n_references, derive_seed(config.seed, 5));
    masks = make_mask_provider(std::move(ecfg));
  }
  const Tensor eval_z = fid ? evaluation_noise(std::min(config.fid_samples, dataset.size()), config.seed) : Tensor();

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.xai_active = config.xai_active(epoch);
    std::shuffle(order.begin(), order.end(), data_rng);
    std::size_t batches = 0;
    try {
      for (std::size_t s = 0; s < order.size(); s += config.batch_size, ++step) {
        const std::size_t n = std::min(config.batch_size, order.size() - s);
        const Tensor real = dataset.images.gather(std::span<const std::size_t>(order.data() + s, n));
        StepAugmentation aug;
        if (config.diffaug) {
          aug.policy = &config.aug_policy;
          aug.draws = sample_augmentation(config.aug_policy, n, item[1], item[2], aug_rng);
        }
        {
          auto t = res.stopwatch.scope("d_step");
          rec.d_loss += discriminator_step(pair, real, sample_noise(n, pair.noise_dim, noise_rng), opt.discriminator, aug);
        }
        {
          auto t = res.stopwatch.scope("g_step");
          rec.g_loss += generator_step(pair, sample_noise(n, pair.noise_dim, noise_rng), rec.xai_active, config.alpha,
                                       masks, opt.generator, derive_seed(config.seed, 1000 + step), aug,
                                       &res.stopwatch)
                            .g_loss;
        }
        ++batches;
      }
    } catch (const NumericError& e) {
      res.trace.aborted = true;
      res.trace.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      return res;
    }
    rec.d_loss /= static_cast<double>(batches);
    rec.g_loss /= static_cast<double>(batches);
    rec.seconds = std::max(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(),
                           std::numeric_limits<double>::min());
    res.stopwatch.add("train", rec.seconds);

    if (fid && config.fid_every && ((epoch + 1) % config.fid_every == 0 || epoch + 1 == config.epochs)) {
      auto t = res.stopwatch.scope("fid");
      rec.fid = (*fid)(generate(pair.generator, eval_z));
    }
    res.trace.epochs.push_back(rec);
    if (sink) sink(rec, pair);
  }
  return res;
}

}  // namespace xaigan
