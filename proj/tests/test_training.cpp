#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "xaigan/training.hpp"

using namespace xaigan;

namespace {

Dataset toy_images(std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.images = oracle::random({n, 1, 32, 32}, seed, -1, 1);
  d.name = "toy";
  return d;
}

Tensor noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_noise(n, kNoiseDim, rng);
}

std::vector<Tensor> values(Network& n) {
  std::vector<Tensor> out;
  for (const ParamRef& p : n.params()) out.push_back(*p.value);
  return out;
}

TrainConfig small_config(std::size_t epochs = 4) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 16;
  c.fid_every = 0;
  return c;
}

MaskProvider constant_masks(double v) {
  return [v](Network&, const Tensor& x, std::uint64_t) { return Tensor(x.shape(), v); };
}

}  // namespace

TEST(DiscriminatorStep, HalfEverywhere) {
  GanPair p = build_fc_gan(0);
  Network d({1, 32, 32});
  d.emplace<Reshape>(Shape{1024});
  d.emplace<Dense>(Tensor({1, 1024}), Tensor({1}));
  d.emplace<Sigmoid>();
  p.discriminator = d;
  AdamState opt;
  const auto g_before = values(p.generator);
  const double loss = discriminator_step(p, toy_images(4, 1).images, noise(4, 2), opt);
  EXPECT_NEAR(loss, 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(loss, 1.3863, 1e-4);
  const auto g_after = values(p.generator);
  for (std::size_t i = 0; i < g_before.size(); ++i) EXPECT_TRUE(g_before[i] == g_after[i]);
}

TEST(DiscriminatorStep, PerfectDiscriminatorLimit) {
  EXPECT_LT(bce(Tensor({2, 1}, 1.0), 1.0).value + bce(Tensor({2, 1}, 0.0), 0.0).value, 1e-11);
}

TEST(ModulateGradient, HandCase) {
  const Tensor d({2}, std::vector<double>{0.2, -0.4}), m({2}, std::vector<double>{1.0, 0.5});
  const Tensor out = modulate_gradient(d, m, 0.1);
  EXPECT_EQ(out[0], 0.2 + 0.1 * (0.2 * 1.0));
  EXPECT_EQ(out[1], -0.4 + 0.1 * (-0.4 * 0.5));
  EXPECT_NEAR(out[0], 0.22, 1e-16);
  EXPECT_NEAR(out[1], -0.42, 1e-16);
}

TEST(ModulateGradient, SignPreservedMagnitudeScaled) {
  const Tensor d = oracle::random({4, 1, 8, 8}, 1, -1, 1);
  const Tensor m = oracle::random({4, 1, 8, 8}, 2, 0, 1);
  const Tensor out = modulate_gradient(d, m, 0.2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(std::signbit(out[i]), std::signbit(d[i]));
    EXPECT_NEAR(std::abs(out[i]), std::abs(d[i]) * (1 + 0.2 * m[i]), 1e-15);
  }
}

TEST(ModulateGradient, ZeroMaskOrAlphaIsIdentity) {
  const Tensor d = oracle::random({3, 5}, 1);
  EXPECT_TRUE(modulate_gradient(d, Tensor({3, 5}), 0.7) == d);
  EXPECT_TRUE(modulate_gradient(d, oracle::random({3, 5}, 2, 0, 1), 0.0) == d);
  EXPECT_THROW(modulate_gradient(d, Tensor({3, 4}), 0.1), ShapeError);
}

TEST(GeneratorStep, ZeroMaskMatchesStandardStepBitExactly) {
  GanPair a = build_fc_gan(3), b = a;
  AdamState oa, ob;
  const Tensor z = noise(8, 4);
  generator_step(a, z, false, 0.2, {}, oa);
  generator_step(b, z, true, 0.2, constant_masks(0.0), ob);
  const auto va = values(a.generator), vb = values(b.generator);
  for (std::size_t i = 0; i < va.size(); ++i) EXPECT_TRUE(va[i] == vb[i]);
}

TEST(GeneratorStep, ZeroAlphaMatchesStandardStepBitExactly) {
  GanPair a = build_fc_gan(3), b = a;
  AdamState oa, ob;
  const Tensor z = noise(8, 4);
  generator_step(a, z, false, 0.2, {}, oa);
  generator_step(b, z, true, 0.0, constant_masks(1.0), ob);
  const auto va = values(a.generator), vb = values(b.generator);
  for (std::size_t i = 0; i < va.size(); ++i) EXPECT_TRUE(va[i] == vb[i]);
}

TEST(GeneratorStep, DiscriminatorUntouchedAndGradientModulated) {
  GanPair p = build_fc_gan(1);
  AdamState opt;
  const auto d_before = values(p.discriminator);
  const GeneratorStepInfo info = generator_step(p, noise(4, 1), true, 0.5, constant_masks(1.0), opt);
  const auto d_after = values(p.discriminator);
  for (std::size_t i = 0; i < d_before.size(); ++i) EXPECT_TRUE(d_before[i] == d_after[i]);
  for (std::size_t i = 0; i < info.output_grad.size(); ++i)
    EXPECT_EQ(info.applied_grad[i], info.output_grad[i] + 0.5 * (info.output_grad[i] * 1.0));
}

TEST(GeneratorStep, XaiWithoutExplainerRejected) {
  GanPair p = build_fc_gan(1);
  AdamState opt;
  EXPECT_THROW(generator_step(p, noise(2, 1), true, 0.2, {}, opt), ConfigError);
}

TEST(Train, ScheduleLaw) {
  TrainConfig c = small_config(10);
  c.explainer = ExplainerKind::saliency;
  std::vector<std::size_t> calls(10, 0);
  std::size_t epoch = 0;
  MaskProvider counting = [&](Network&, const Tensor& x, std::uint64_t) {
    ++calls[epoch];
    return Tensor(x.shape(), 0.5);
  };
  EpochSink sink = [&](const EpochRecord& r, GanPair&) { epoch = r.epoch + 1; };
  const TrainResult r = train(c, toy_images(16, 1), nullptr, sink, counting);
  ASSERT_EQ(r.trace.epochs.size(), 10u);
  for (std::size_t e = 0; e < 10; ++e) {
    EXPECT_EQ(r.trace.epochs[e].xai_active, e >= 5) << e;
    EXPECT_EQ(calls[e] > 0, e >= 5) << e;
  }
}

TEST(Train, XaiStartOverride) {
  TrainConfig c = small_config(4);
  c.explainer = ExplainerKind::saliency;
  c.xai_start_epoch = 1;
  EXPECT_FALSE(c.xai_active(0));
  EXPECT_TRUE(c.xai_active(1));
  c.explainer.reset();
  EXPECT_FALSE(c.xai_active(3));
}

TEST(Train, NoExplainerEqualsZeroAlpha) {
  const Dataset ds = toy_images(32, 2);
  TrainConfig plain = small_config(4);
  TrainConfig zero = plain;
  zero.explainer = ExplainerKind::saliency;
  zero.alpha = 0.0;
  const TrainResult a = train(plain, ds), b = train(zero, ds);
  ASSERT_EQ(a.trace.epochs.size(), b.trace.epochs.size());
  for (std::size_t e = 0; e < a.trace.epochs.size(); ++e) {
    EXPECT_EQ(a.trace.epochs[e].d_loss, b.trace.epochs[e].d_loss);
    EXPECT_EQ(a.trace.epochs[e].g_loss, b.trace.epochs[e].g_loss);
  }
}

TEST(Train, DeterministicPerSeed) {
  const Dataset ds = toy_images(24, 3);
  TrainConfig c = small_config(2);
  c.explainer = ExplainerKind::deepshap;
  c.xai_start_epoch = 0;
  c.diffaug = true;
  TrainResult a = train(c, ds), b = train(c, ds);
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_EQ(a.trace.epochs[e].d_loss, b.trace.epochs[e].d_loss);
    EXPECT_EQ(a.trace.epochs[e].g_loss, b.trace.epochs[e].g_loss);
  }
  const auto va = values(a.pair.generator), vb = values(b.pair.generator);
  for (std::size_t i = 0; i < va.size(); ++i) EXPECT_TRUE(va[i] == vb[i]);
  c.seed = 1;
  TrainResult d = train(c, ds);
  EXPECT_NE(a.trace.epochs[0].d_loss, d.trace.epochs[0].d_loss);
}

TEST(Train, NonFiniteAbortsWithPartialTrace) {
  TrainConfig c = small_config(3);
  c.explainer = ExplainerKind::saliency;
  c.xai_start_epoch = 1;
  const TrainResult r = train(c, toy_images(32, 4), nullptr, {}, constant_masks(std::nan("")));
  EXPECT_TRUE(r.trace.aborted);
  EXPECT_EQ(r.trace.epochs.size(), 1u);
  EXPECT_NE(r.trace.diagnostic.find("epoch 1"), std::string::npos);
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.alpha = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.data_fraction = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  EXPECT_THROW(train(c, toy_images(10, 1)), ConfigError);
}

TEST(Train, DcGanOnColourImagesRuns) {
  Dataset ds;
  ds.images = oracle::random({8, 3, 32, 32}, 5);
  TrainConfig c = small_config(1);
  c.architecture = Architecture::dc;
  c.batch_size = 4;
  c.explainer = ExplainerKind::lime;
  c.lime_samples = 70;
  c.xai_start_epoch = 0;
  const TrainResult r = train(c, ds);
  ASSERT_EQ(r.trace.epochs.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.trace.epochs[0].g_loss));
  EXPECT_GT(r.stopwatch.elapsed("explain"), 0.0);
}
