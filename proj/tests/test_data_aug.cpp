#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "xaigan/augment.hpp"
#include "xaigan/data.hpp"

using namespace xaigan;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / ("xaigan_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                  ::testing::UnitTest::GetInstance()->current_test_info()->name());
  fs::create_directories(d);
  return d;
}

void be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

void write(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<std::uint8_t> idx_images(std::uint32_t magic, std::uint32_t n, std::uint32_t r, std::uint32_t c, std::uint8_t fill) {
  std::vector<std::uint8_t> b;
  be32(b, magic);
  be32(b, n);
  be32(b, r);
  be32(b, c);
  b.resize(16 + std::size_t{n} * r * c, fill);
  return b;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t n) {
  std::vector<std::uint8_t> b;
  be32(b, 0x801);
  be32(b, n);
  for (std::uint32_t i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(i % 10));
  return b;
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Idx, ParsesAndResizesConstantImage) {
  const fs::path d = temp_dir();
  write(d / "img", idx_images(0x803, 3, 28, 28, 255));
  write(d / "lab", idx_labels(3));
  const Dataset ds = load_idx(d / "img", d / "lab");
  EXPECT_EQ(ds.images.shape(), (Shape{3, 1, 32, 32}));
  for (double v : ds.images.values()) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_EQ(*ds.labels, (std::vector<int>{0, 1, 2}));
  const Dataset raw = load_idx(d / "img", std::nullopt, {false});
  EXPECT_EQ(raw.images.shape(), (Shape{3, 1, 28, 28}));
}

TEST(Idx, Errors) {
  const fs::path d = temp_dir();
  write(d / "bad", idx_images(0x801, 1, 28, 28, 0));
  EXPECT_EQ(error_code([&] { load_idx(d / "bad"); }), "bad_magic");
  auto t = idx_images(0x803, 2, 28, 28, 0);
  t.resize(t.size() - 5);
  write(d / "trunc", t);
  EXPECT_EQ(error_code([&] { load_idx(d / "trunc"); }), "truncated");
  write(d / "img", idx_images(0x803, 2, 28, 28, 0));
  write(d / "lab", idx_labels(3));
  EXPECT_EQ(error_code([&] { load_idx(d / "img", d / "lab"); }), "count_mismatch");
  EXPECT_EQ(error_code([&] { load_idx(d / "nope"); }), "io");
}

TEST(Pixels, AffineEndpoints) {
  EXPECT_EQ(byte_to_unit(0), -1.0);
  EXPECT_EQ(byte_to_unit(255), 1.0);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(unit_to_byte(byte_to_unit(static_cast<std::uint8_t>(b))), b);
}

TEST(Resize, ConstantStaysConstant) {
  const Tensor r = resize_bilinear(Tensor({2, 1, 28, 28}, 0.3), 32, 32);
  for (double v : r.values()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Cifar, RecordsAndLabels) {
  const fs::path d = temp_dir();
  std::vector<std::uint8_t> b;
  for (int r = 0; r < 10; ++r) {
    b.push_back(static_cast<std::uint8_t>(r));
    for (int j = 0; j < 3072; ++j) b.push_back(static_cast<std::uint8_t>((r * 7 + j) % 256));
  }
  write(d / "batch.bin", b);
  const Dataset ds = load_cifar10({d / "batch.bin"});
  ASSERT_EQ(ds.size(), 10u);
  EXPECT_EQ((*ds.labels)[9], 9);
  for (int r = 0; r < 10; ++r)
    for (int j = 0; j < 3072; j += 97)
      EXPECT_EQ(unit_to_byte(ds.images[static_cast<std::size_t>(r * 3072 + j)]), (r * 7 + j) % 256);

  b[3073] = 10;
  write(d / "label.bin", b);
  EXPECT_EQ(error_code([&] { load_cifar10({d / "label.bin"}); }), "bad_label");
  b.pop_back();
  write(d / "short.bin", b);
  EXPECT_EQ(error_code([&] { load_cifar10({d / "short.bin"}); }), "bad_length");
}

TEST(Subsample, FractionsAndDeterminism) {
  Dataset big;
  big.images = Tensor({60000, 1});
  for (std::size_t i = 0; i < 60000; ++i) big.images[i] = static_cast<double>(i);
  EXPECT_EQ(subsample(big, 0.2, 1).size(), 12000u);
  EXPECT_EQ(subsample(big, 0.35, 1).size(), 21000u);
  const Dataset a = subsample(big, 0.01, 5), b = subsample(big, 0.01, 5), c = subsample(big, 0.01, 6);
  EXPECT_TRUE(a.images == b.images);
  EXPECT_FALSE(a.images == c.images);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a.images[i - 1], a.images[i]);
  EXPECT_TRUE(subsample(big, 1.0, 3).images == big.images);
  EXPECT_THROW(subsample(big, 0.0, 1), ConfigError);
  EXPECT_THROW(subsample(big, 1e-6, 1), ConfigError);
}

TEST(Subsample, ClassBalanced) {
  Dataset d;
  d.images = Tensor({100, 1});
  d.labels = std::vector<int>(100);
  for (std::size_t i = 0; i < 100; ++i) (*d.labels)[i] = i < 80 ? 0 : 1;
  const Dataset s = subsample(d, 0.5, 2, true);
  EXPECT_EQ(std::count(s.labels->begin(), s.labels->end(), 0), 40);
  EXPECT_EQ(std::count(s.labels->begin(), s.labels->end(), 1), 10);
}

TEST(Noise, ShapeAndMoments) {
  std::mt19937_64 rng(17);
  EXPECT_EQ(sample_noise(4, 100, rng).shape(), (Shape{4, 100}));
  const Tensor z = sample_noise(1000, 100, rng);
  const double n = static_cast<double>(z.size());
  double mean = z.sum() / n, var = 0;
  for (double v : z.values()) var += (v - mean) * (v - mean);
  var /= n - 1;
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(n));
  EXPECT_LT(std::abs(var - 1.0), 3.0 * std::sqrt(2.0 / n));
  std::mt19937_64 r1(3), r2(3);
  EXPECT_TRUE(sample_noise(2, 100, r1) == sample_noise(2, 100, r2));
}

TEST(Augment, EmptyPolicyIsIdentity) {
  const AugPolicy p = parse_aug_policy("");
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random({2, 3, 8, 8}, 1);
  const AugDraws d = sample_augmentation(p, 2, 8, 8, rng);
  EXPECT_TRUE(diff_augment(x, p, d) == x);
  EXPECT_TRUE(diff_augment_backward(x, p, d) == x);
}

TEST(Augment, PolicyParsing) {
  EXPECT_EQ(parse_aug_policy("cutout, color").ops, (std::vector<AugOp>{AugOp::color, AugOp::cutout}));
  EXPECT_THROW(parse_aug_policy("color,blur"), ConfigError);
  EXPECT_THROW(parse_aug_policy("color,color"), ConfigError);
}

TEST(Augment, TranslationMovesOneColumn) {
  const AugPolicy p = parse_aug_policy("translation");
  AugDraws d;
  d.shift_x = {1};
  d.shift_y = {0};
  Tensor x({1, 1, 2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor y = diff_augment(x, p, d);
  EXPECT_EQ(y.values(), (std::vector<double>{0, 1, 2, 0, 4, 5}));
}

TEST(Augment, CutoutZeroesSquare) {
  const AugPolicy p = parse_aug_policy("cutout");
  AugDraws d;
  d.cut_size = 2;
  d.cut_cx = {1};
  d.cut_cy = {1};
  const Tensor y = diff_augment(Tensor({1, 1, 4, 4}, 1.0), p, d);
  EXPECT_EQ(y.sum(), 12.0);
  EXPECT_EQ(y.at(0, 0, 0, 0), 0.0);
  EXPECT_EQ(y.at(0, 0, 1, 1), 0.0);
}

TEST(Augment, ChainGradientMatchesFiniteDifferences) {
  const Tensor w = oracle::random({3, 3, 8, 8}, 4);
  for (const char* policy : {"translation,cutout", "color", "color,translation,cutout"}) {
    const AugPolicy p = parse_aug_policy(policy);
    std::mt19937_64 rng(9);
    const AugDraws d = sample_augmentation(p, 3, 8, 8, rng);
    auto f = [&](const Tensor& x) {
      const Tensor y = diff_augment(x, p, d);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
      return s;
    };
    const Tensor x = oracle::random({3, 3, 8, 8}, 5);
    EXPECT_LT(oracle::max_rel_error(diff_augment_backward(w, p, d), oracle::numeric_gradient(f, x)), 1e-4) << policy;
  }
}

TEST(Augment, DrawsCoverBatch) {
  const AugPolicy p = parse_aug_policy("translation");
  std::mt19937_64 rng(1);
  const AugDraws d = sample_augmentation(p, 2, 8, 8, rng);
  EXPECT_THROW(diff_augment(Tensor({3, 1, 8, 8}), p, d), ShapeError);
}
