#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "xaigan/adam.hpp"
#include "xaigan/gradient_check.hpp"
#include "xaigan/layers.hpp"
#include "xaigan/loss.hpp"
#include "xaigan/network.hpp"

using namespace xaigan;

namespace {

Network single(std::unique_ptr<Layer> l, Shape in) {
  Network n(std::move(in));
  n.add(std::move(l));
  return n;
}

double check_layer(Network net, const Tensor& x, bool training = true) {
  GradCheckOptions opt;
  opt.training = training;
  const Shape out = net.forward(x, training).shape();
  return gradient_check(net, x, random_projection_loss(out, 5), opt).max_rel_error;
}

}  // namespace

TEST(Tensor, ShapesAndViews) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.item_shape(), (Shape{3}));
  EXPECT_EQ(t.slice(1, 2)[0], 4);
  EXPECT_EQ(t.reshaped({3, 2}).dim(0), 3u);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
  const std::vector<std::size_t> idx{1, 0};
  EXPECT_EQ(t.gather(idx)[0], 4);
}

TEST(Dense, IdentityForwardAndBackward) {
  Dense d(Tensor({2, 2}, std::vector<double>{1, 0, 0, 1}), Tensor({2}));
  const Tensor y = d.forward(Tensor({1, 2}, std::vector<double>{1, 2}), true);
  EXPECT_EQ(y[0], 1);
  EXPECT_EQ(y[1], 2);
  const Tensor g = d.backward(Tensor({1, 2}, std::vector<double>{0.3, -0.7}), true);
  EXPECT_EQ(g[0], 0.3);
  EXPECT_EQ(g[1], -0.7);
}

TEST(Dense, BackwardBeforeForwardIsStateError) {
  std::mt19937_64 rng(1);
  Dense d(3, 2, rng);
  EXPECT_THROW(d.backward(Tensor({1, 2}), true), StateError);
}

TEST(Dense, ShapeMismatchNamesShapes) {
  std::mt19937_64 rng(1);
  Dense d(3, 2, rng);
  try {
    d.forward(Tensor({1, 4}), true);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.code(), "shape_mismatch");
  }
}

TEST(LeakyRelu, Slope) {
  LeakyRelu l(0.2);
  const Tensor y = l.forward(Tensor({1, 2}, std::vector<double>{-1, 3}), true);
  EXPECT_DOUBLE_EQ(y[0], -0.2);
  EXPECT_DOUBLE_EQ(y[1], 3.0);
}

TEST(Tanh, UnitDerivativeAtZero) {
  Tanh t;
  t.forward(Tensor({1, 1}), true);
  EXPECT_EQ(t.backward(Tensor({1, 1}, 0.37), true)[0], 0.37);
}

TEST(Conv2d, AllOnesMatchesDirectSum) {
  std::mt19937_64 rng(0);
  Conv2d c(1, 1, 4, 2, 1, rng);
  c.weight().fill(1.0);
  c.bias().fill(0.0);
  const Tensor x({1, 1, 4, 4}, 1.0);
  const Tensor y = c.forward(x, true);
  const Tensor ref = oracle::conv2d(x, c.weight(), c.bias(), 2, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  ASSERT_EQ(y.shape(), ref.shape());
  // each 4×4 window with one padded row and column covers 9 ones
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(y[i], 9.0);
    EXPECT_DOUBLE_EQ(ref[i], 9.0);
  }
}

TEST(Conv2d, RandomMatchesOracle) {
  std::mt19937_64 rng(3);
  for (auto [k, s, p] : {std::tuple{3u, 1u, 1u}, {4u, 2u, 1u}, {5u, 1u, 0u}, {4u, 1u, 0u}}) {
    Conv2d c(3, 4, k, s, p, rng, ConvInit::fan_in);
    const Tensor x = oracle::random({2, 3, 9, 8}, 11);
    const Tensor y = c.forward(x, true);
    const Tensor ref = oracle::conv2d(x, c.weight(), c.bias(), s, p);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(ConvTranspose2d, RandomMatchesOracle) {
  std::mt19937_64 rng(4);
  for (auto [k, s, p] : {std::tuple{4u, 2u, 1u}, {4u, 1u, 0u}, {3u, 2u, 0u}}) {
    ConvTranspose2d c(3, 2, k, s, p, rng);
    auto params = c.params();
    *params[1].value = oracle::random({2}, 8);
    const Tensor x = oracle::random({2, 3, 5, 4}, 12);
    const Tensor y = c.forward(x, true);
    const Tensor ref = oracle::conv_transpose2d(x, *params[0].value, *params[1].value, s, p);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(GradientCheck, EveryLayerKind) {
  std::mt19937_64 rng(21);
  const Tensor flat = oracle::random({3, 6}, 1);
  const Tensor img = oracle::random({2, 3, 6, 6}, 2);
  EXPECT_LT(check_layer(single(std::make_unique<Dense>(6, 4, rng), {6}), flat), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<Conv2d>(3, 2, 4, 2, 1, rng, ConvInit::fan_in), {3, 6, 6}), img), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<Conv2d>(3, 2, 3, 1, 1, rng, ConvInit::fan_in), {3, 6, 6}), img), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<ConvTranspose2d>(3, 2, 4, 2, 1, rng), {3, 6, 6}), img), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<BatchNorm>(3, rng), {3, 6, 6}), img), 1e-5);
  EXPECT_LT(check_layer(single(std::make_unique<BatchNorm>(6, rng), {6}), flat), 1e-5);
  EXPECT_LT(check_layer(single(std::make_unique<BatchNorm>(3, rng), {3, 6, 6}), img, false), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<Dropout>(0.3, 4), {6}), flat), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<LeakyRelu>(0.2), {6}), flat), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<Relu>(), {6}), flat), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<Tanh>(), {6}), flat), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<Sigmoid>(), {6}), flat), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<MaxPool2d>(2), {3, 6, 6}), img), 1e-6);
  EXPECT_LT(check_layer(single(std::make_unique<Reshape>(Shape{108}), {3, 6, 6}), img), 1e-6);
}

TEST(GradientCheck, InputGradientAgreesWithIndependentOracle) {
  std::mt19937_64 rng(5);
  Network net({2, 5, 5});
  net.emplace<Conv2d>(2, 3, 3, 1, 1, rng, ConvInit::fan_in);
  net.emplace<BatchNorm>(3, rng);
  net.emplace<LeakyRelu>(0.2);
  net.emplace<Reshape>(Shape{75});
  net.emplace<Dense>(75, 1, rng);
  net.emplace<Sigmoid>();
  const Tensor x = oracle::random({3, 2, 5, 5}, 6);
  auto f = [&](const Tensor& in) { return net.forward(in, true).sum(); };
  const Tensor numeric = oracle::numeric_gradient(f, x);
  net.forward(x, true);
  const Tensor analytic = net.backward(Tensor({3, 1}, 1.0));
  EXPECT_LT(oracle::max_rel_error(analytic, numeric), 1e-5);
}

TEST(GradientCheck, DenseSquaredLoss) {
  std::mt19937_64 rng(9);
  Network net({4});
  net.emplace<Dense>(4, 3, rng);
  const Tensor target = oracle::random({2, 3}, 10);
  LossFn sq = [&](const Tensor& y) {
    LossResult r{0.0, Tensor(y.shape())};
    for (std::size_t i = 0; i < y.size(); ++i) {
      r.value += 0.5 * (y[i] - target[i]) * (y[i] - target[i]);
      r.grad[i] = y[i] - target[i];
    }
    return r;
  };
  EXPECT_LT(gradient_check(net, oracle::random({2, 4}, 3), sq).max_rel_error, 1e-6);
}

TEST(GradientCheck, ZeroWeightsConstantLoss) {
  Network net({3});
  net.emplace<Dense>(Tensor({2, 3}), Tensor({2}));
  LossFn constant = [](const Tensor& y) { return LossResult{1.5, Tensor(y.shape())}; };
  const GradCheckReport r = gradient_check(net, oracle::random({2, 3}, 1), constant);
  EXPECT_EQ(r.max_rel_error, 0.0);
  EXPECT_GT(r.checked, 0u);
}

TEST(BatchNorm, RunningStatisticsAndEvalMode) {
  std::mt19937_64 rng(1);
  BatchNorm bn(2, rng);
  const Tensor x({4, 2}, std::vector<double>{1, 10, 2, 20, 3, 30, 4, 40});
  const Tensor y = bn.forward(x, true);
  double mean0 = 0;
  for (std::size_t i = 0; i < 4; ++i) mean0 += y.at(i, 0);
  EXPECT_NEAR(mean0 / 4, 0.0, 1e-12);
  EXPECT_NEAR(bn.running_mean()[0], 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(bn.running_var()[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-12);
  const Tensor e1 = bn.forward(x, false), e2 = bn.forward(x, false);
  EXPECT_TRUE(e1 == e2);
}

TEST(Dropout, InvertedScalingAndEvalIdentity) {
  Dropout d(0.3, 7);
  const Tensor x({1, 10000}, 1.0);
  const Tensor y = d.forward(x, true);
  std::size_t kept = 0;
  for (double v : y.values()) {
    if (v != 0.0) {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.7);
      ++kept;
    }
  }
  EXPECT_NEAR(kept / 10000.0, 0.7, 0.03);
  EXPECT_TRUE(d.forward(x, false) == x);
}

TEST(Loss, BceAtHalf) {
  const LossResult r = bce(Tensor({4, 1}, 0.5), 1.0);
  EXPECT_NEAR(r.value, std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(bce(Tensor({1, 1}, 0.0), 1.0).value));
}

TEST(Loss, SoftmaxRowsSumToOne) {
  const Tensor p = softmax(oracle::random({5, 10}, 2, -30, 30));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 10; ++j) s += p.at(i, j);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Loss, CrossEntropyGradientMatchesFiniteDifferences) {
  const Tensor logits = oracle::random({3, 4}, 7, -2, 2);
  const std::vector<int> labels{0, 3, 1};
  const Tensor numeric = oracle::numeric_gradient([&](const Tensor& l) { return cross_entropy(l, labels).value; }, logits);
  EXPECT_LT(oracle::max_rel_error(cross_entropy(logits, labels).grad, numeric), 1e-6);
}

TEST(Adam, FirstStepMagnitude) {
  Tensor w({1}, 0.5), g({1}, 1.0);
  std::vector<ParamRef> p{{"w", &w, &g}};
  AdamState st;
  adam_step(p, st);
  EXPECT_NEAR(w[0] - 0.5, -0.0002, 1e-9);
}

TEST(Adam, ZeroGradientLeavesParams) {
  Tensor w({3}, 0.25), g({3}, 0.0);
  std::vector<ParamRef> p{{"w", &w, &g}};
  AdamState st;
  for (int i = 0; i < 3; ++i) adam_step(p, st);
  EXPECT_TRUE(w == Tensor({3}, 0.25));
}

TEST(Adam, IdenticalParamsStayIdentical) {
  Tensor a({2}, 0.1), b({2}, 0.1), g({2}, std::vector<double>{0.3, -2.0});
  Tensor g2 = g;
  std::vector<ParamRef> p{{"a", &a, &g}, {"b", &b, &g2}};
  AdamState st;
  for (int i = 0; i < 5; ++i) adam_step(p, st);
  EXPECT_TRUE(a == b);
}

TEST(Adam, ShapeChangeIsRejected) {
  Tensor w({2}), g({2}, 1.0);
  std::vector<ParamRef> p{{"w", &w, &g}};
  AdamState st;
  adam_step(p, st);
  Tensor w3({3}), g3({3});
  std::vector<ParamRef> q{{"w", &w3, &g3}};
  EXPECT_THROW(adam_step(q, st), ShapeError);
}
