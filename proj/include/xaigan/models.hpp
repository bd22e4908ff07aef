#pragma once

#include <cstdint>
#include <random>

#include "xaigan/network.hpp"

namespace xaigan {

enum class Architecture { fc, dc };

struct GanPair {
  Network generator;
  Network discriminator;
  std::size_t noise_dim = 100;
  Shape image_shape;  // (C, H, W)
};

inline constexpr std::size_t kNoiseDim = 100;
inline constexpr double kLeakySlope = 0.2;
inline constexpr double kDropoutRate = 0.3;

/// Fully connected GAN on 1×32×32 images.
///
///   G: 100 → 256 → 512 → 1296 → 1024 (tanh), reshaped to (1,32,32)
///   D: 1024 → 1296 → 512 → 256 → 1 (sigmoid), dropout 0.3 after each hidden layer
inline GanPair build_fc_gan(std::uint64_t seed = 0, double leaky_slope = kLeakySlope,
                            double dropout = kDropoutRate) {
  std::mt19937_64 rng(seed);
  GanPair pair{Network({kNoiseDim}), Network({1, 32, 32}), kNoiseDim, {1, 32, 32}};

  Network& g = pair.generator;
  const std::size_t gdims[] = {kNoiseDim, 256, 512, 1296};
  for (std::size_t i = 0; i + 1 < std::size(gdims); ++i) {
    g.emplace<Dense>(gdims[i], gdims[i + 1], rng);
    g.emplace<LeakyRelu>(leaky_slope);
  }
  g.emplace<Dense>(1296, 1024, rng);
  g.emplace<Tanh>();
  g.emplace<Reshape>(Shape{1, 32, 32});

  Network& d = pair.discriminator;
  d.emplace<Reshape>(Shape{1024});
  const std::size_t ddims[] = {1024, 1296, 512, 256};
  for (std::size_t i = 0; i + 1 < std::size(ddims); ++i) {
    d.emplace<Dense>(ddims[i], ddims[i + 1], rng);
    d.emplace<LeakyRelu>(leaky_slope);
    d.emplace<Dropout>(dropout, seed + 1000 + i);
  }
  d.emplace<Dense>(256, 1, rng);
  d.emplace<Sigmoid>();
  return pair;
}

struct DcGanOptions {
  std::size_t channels = 3;
  double leaky_slope = kLeakySlope;
  double discriminator_dropout = 0.0;  // 0 disables
};

/// DC-GAN on C×32×32 images.
///
///   G: z → (256,4,4) → (128,8,8) → (64,16,16) → (C,32,32), transposed convs k4
///   D: (C,32,32) → (64,16,16) → (128,8,8) → (256,4,4) → (1,1,1), convs k4
///
/// Batchnorm follows every conv except the last of each network; convs that
/// feed a batchnorm have no bias. The 1×1 ↔ 4×4 end layers
/// use stride 1, pad 0; all others stride 2, pad 1.
inline GanPair build_dc_gan(std::uint64_t seed = 0, const DcGanOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  const std::size_t c = opt.channels;
  GanPair pair{Network({kNoiseDim}), Network({c, 32, 32}), kNoiseDim, {c, 32, 32}};

  Network& g = pair.generator;
  g.emplace<Reshape>(Shape{kNoiseDim, 1, 1});
  g.emplace<ConvTranspose2d>(kNoiseDim, 256, 4, 1, 0, rng).disable_bias();
  g.emplace<BatchNorm>(256, rng);
  g.emplace<LeakyRelu>(opt.leaky_slope);
  g.emplace<ConvTranspose2d>(256, 128, 4, 2, 1, rng).disable_bias();
  g.emplace<BatchNorm>(128, rng);
  g.emplace<LeakyRelu>(opt.leaky_slope);
  g.emplace<ConvTranspose2d>(128, 64, 4, 2, 1, rng).disable_bias();
  g.emplace<BatchNorm>(64, rng);
  g.emplace<LeakyRelu>(opt.leaky_slope);
  g.emplace<ConvTranspose2d>(64, c, 4, 2, 1, rng);
  g.emplace<Tanh>();

  Network& d = pair.discriminator;
  const std::size_t dch[] = {c, 64, 128, 256};
  for (std::size_t i = 0; i + 1 < std::size(dch); ++i) {
    d.emplace<Conv2d>(dch[i], dch[i + 1], 4, 2, 1, rng).disable_bias();
    d.emplace<BatchNorm>(dch[i + 1], rng);
    d.emplace<LeakyRelu>(opt.leaky_slope);
    if (opt.discriminator_dropout > 0) d.emplace<Dropout>(opt.discriminator_dropout, seed + 1000 + i);
  }
  d.emplace<Conv2d>(256, 1, 4, 1, 0, rng);
  d.emplace<Reshape>(Shape{1});
  d.emplace<Sigmoid>();
  return pair;
}

inline GanPair build_gan(Architecture arch, std::uint64_t seed, std::size_t channels = 1) {
  if (arch == Architecture::fc) {
    if (channels != 1) throw ConfigError("architecture", "fc GAN expects single-channel images");
    return build_fc_gan(seed);
  }
  DcGanOptions opt;
  opt.channels = channels;
  return build_dc_gan(seed, opt);
}

/// LeNet-5 style classifier on C×32×32 inputs:
/// conv5(6) relu pool2, conv5(16) relu pool2, dense 400→120→84→classes.
/// The 84-unit activation is the feature layer.
inline Network build_lenet_classifier(std::size_t num_classes, std::size_t in_channels = 1,
                                      std::uint64_t seed = 0) {
  if (num_classes < 2) throw ConfigError("num_classes", "must be at least 2");
  std::mt19937_64 rng(seed);
  Network net({in_channels, 32, 32});
  net.emplace<Conv2d>(in_channels, 6, 5, 1, 0, rng, ConvInit::fan_in);
  net.emplace<Relu>();
  net.emplace<MaxPool2d>(2);
  net.emplace<Conv2d>(6, 16, 5, 1, 0, rng, ConvInit::fan_in);
  net.emplace<Relu>();
  net.emplace<MaxPool2d>(2);
  net.emplace<Reshape>(Shape{400});
  net.emplace<Dense>(400, 120, rng);
  net.emplace<Relu>();
  net.emplace<Dense>(120, 84, rng);
  net.emplace<Relu>();
  net.set_feature_layer(net.size() - 1);
  net.emplace<Dense>(84, num_classes, rng);
  return net;
}

/// Penultimate activations: output of the layer marked as feature layer.
inline Tensor feature_forward(Network& classifier, const Tensor& x) {
  return classifier.forward_to(x, classifier.feature_layer() + 1, false);
}

}  // namespace xaigan
