#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xaigan/tensor.hpp"

namespace xaigan {

/// Images (n, c, h, w) scaled to [-1, 1], optional class ids.
struct Dataset {
  Tensor images;
  std::optional<std::vector<int>> labels;
  std::string name;

  std::size_t size() const { return images.empty() ? 0 : images.dim(0); }
  Shape item_shape() const { return images.item_shape(); }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out{images.gather(idx), std::nullopt, name};
    if (labels) {
      std::vector<int> l;
      l.reserve(idx.size());
      for (std::size_t i : idx) l.push_back((*labels)[i]);
      out.labels = std::move(l);
    }
    return out;
  }

  /// First `n` examples (all of them when n >= size()).
  Dataset head(std::size_t n) const {
    std::vector<std::size_t> idx(std::min(n, size()));
    std::iota(idx.begin(), idx.end(), 0);
    return subset(idx);
  }
};

inline double byte_to_unit(std::uint8_t b) { return static_cast<double>(b) / 127.5 - 1.0; }
inline std::uint8_t unit_to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround((v + 1.0) * 127.5), 0L, 255L));
}

/// Bilinear resize of (n, c, h, w) images, half-pixel centres, edge clamped.
inline Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({n, c, out_h, out_w});
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* in = x.ptr() + p * h * w;
    double* out = y.ptr() + p * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const double fy = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, h - 1);
      const double ty = fy - static_cast<double>(y0);
      for (std::size_t j = 0; j < out_w; ++j) {
        const double fx = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, w - 1);
        const double tx = fx - static_cast<double>(x0);
        const double top = in[y0 * w + x0] * (1 - tx) + in[y0 * w + x1] * tx;
        const double bot = in[y1 * w + x0] * (1 - tx) + in[y1 * w + x1] * tx;
        out[i * out_w + j] = top * (1 - ty) + bot * ty;
      }
    }
  }
  return y;
}

// --------------------------------------------------------------------------
// IDX (MNIST / Fashion-MNIST)

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("io", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

}  // namespace detail

struct IdxOptions {
  bool resize_to_32 = true;
};

/// Parses an IDX image file (and optional label file). Pixels map [0,255] →
/// [-1,1]; images are bilinearly resized to 32×32 unless disabled.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::optional<std::filesystem::path>& labels_path = std::nullopt,
                        const IdxOptions& opt = {}) {
  const std::vector<std::uint8_t> img = detail::read_file(images_path);
  if (img.size() < 16) throw FormatError("truncated", images_path.string() + ": header shorter than 16 bytes");
  if (detail::read_be32(img, 0) != kIdxImagesMagic)
    throw FormatError("bad_magic", images_path.string() + ": image magic is not 0x00000803");
  const std::size_t n = detail::read_be32(img, 4), rows = detail::read_be32(img, 8), cols = detail::read_be32(img, 12);
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("bad_header", images_path.string() + ": zero dimension");
  if (img.size() < 16 + n * rows * cols)
    throw FormatError("truncated", images_path.string() + ": payload holds " + std::to_string(img.size() - 16) +
                                       " bytes, header promises " + std::to_string(n * rows * cols));

  Tensor raw({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) raw[i] = byte_to_unit(img[16 + i]);
  Dataset ds{opt.resize_to_32 && (rows != 32 || cols != 32) ? resize_bilinear(raw, 32, 32) : std::move(raw),
             std::nullopt, images_path.filename().string()};

  if (labels_path) {
    const std::vector<std::uint8_t> lab = detail::read_file(*labels_path);
    if (lab.size() < 8) throw FormatError("truncated", labels_path->string() + ": header shorter than 8 bytes");
    if (detail::read_be32(lab, 0) != kIdxLabelsMagic)
      throw FormatError("bad_magic", labels_path->string() + ": label magic is not 0x00000801");
    const std::size_t m = detail::read_be32(lab, 4);
    if (m != n)
      throw FormatError("count_mismatch", std::to_string(n) + " images but " + std::to_string(m) + " labels");
    if (lab.size() < 8 + m) throw FormatError("truncated", labels_path->string() + ": truncated label payload");
    ds.labels = std::vector<int>(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(m));
  }
  return ds;
}

// --------------------------------------------------------------------------
// CIFAR-10 binary

inline constexpr std::size_t kCifarRecord = 1 + 3 * 32 * 32;

/// Concatenates CIFAR-10 binary batch files: records of 1 label byte then
/// 1024 R, 1024 G, 1024 B bytes.
inline Dataset load_cifar10(const std::vector<std::filesystem::path>& files) {
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    std::vector<std::uint8_t> b = detail::read_file(f);
    if (b.empty() || b.size() % kCifarRecord != 0)
      throw FormatError("bad_length", f.string() + ": length " + std::to_string(b.size()) +
                                          " is not a multiple of 3073");
    all.insert(all.end(), b.begin(), b.end());
  }
  if (all.empty()) throw FormatError("bad_length", "no CIFAR-10 records");
  const std::size_t n = all.size() / kCifarRecord;
  Dataset ds{Tensor({n, 3, 32, 32}), std::vector<int>(n), "cifar10"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t label = all[i * kCifarRecord];
    if (label > 9) throw FormatError("bad_label", "record " + std::to_string(i) + " has label " + std::to_string(label));
    (*ds.labels)[i] = label;
    for (std::size_t j = 0; j < 3072; ++j) ds.images[i * 3072 + j] = byte_to_unit(all[i * kCifarRecord + 1 + j]);
  }
  return ds;
}

// --------------------------------------------------------------------------

/// floor(fraction * n) examples without replacement, kept in original order.
/// With `class_balanced`, each class contributes floor(fraction * n_class).
inline Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed, bool class_balanced = false) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("data_fraction", "must be in (0, 1]");
  if (fraction == 1.0) return ds;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  auto draw = [&](std::vector<std::size_t> pool) {
    const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool.size()) + 1e-9));
    std::shuffle(pool.begin(), pool.end(), rng);
    picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  };
  if (class_balanced) {
    if (!ds.labels) throw ConfigError("class_balanced", "dataset has no labels");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[(*ds.labels)[i]].push_back(i);
    for (auto& [cls, pool] : by_class) draw(pool);
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    draw(std::move(all));
  }
  if (picked.empty()) throw ConfigError("data_fraction", "subsample would be empty");
  std::sort(picked.begin(), picked.end());
  return ds.subset(picked);
}

/// Standard-normal noise of shape (batch, dim).
inline Tensor sample_noise(std::size_t batch, std::size_t dim, std::mt19937_64& rng) {
  if (batch == 0 || dim == 0) throw ShapeError("sample_noise", "batch and dim must be positive");
  return Tensor::normal({batch, dim}, rng);
}

/// splitmix64 finalizer; derives independent stream seeds from one seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace xaigan
