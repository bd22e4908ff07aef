#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "xaigan/data.hpp"
#include "xaigan/tensor.hpp"

namespace xaigan {

/// Writes a binary PGM (P5) for a single-channel image, or PPM (P6) for a
/// 3-channel image. `image` is (C,H,W) or (1,C,H,W); values in [lo, hi] map
/// linearly to [0, 255].
inline void write_pnm(const std::filesystem::path& path, const Tensor& image, double lo = -1.0, double hi = 1.0) {
  const Shape s = image.rank() == 4 ? image.item_shape() : image.shape();
  if (s.size() != 3 || (s[0] != 1 && s[0] != 3))
    throw ShapeError("write_pnm", "expected (1|3,H,W), got " + shape_str(image.shape()));
  const std::size_t c = s[0], h = s[1], w = s[2];
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("io", "cannot open " + path.string());
  os << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = (image[(ch * h + y) * w + x] - lo) / (hi - lo);
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
      }
  if (!os) throw FormatError("io", "write failed for " + path.string());
}

/// Tiles up to rows×cols images of an (N,C,H,W) batch into one (C,H',W')
/// image with a 1-pixel border of value `pad`.
inline Tensor make_grid(const Tensor& batch, std::size_t rows = 8, std::size_t cols = 8, double pad = -1.0) {
  const std::size_t n = std::min(batch.dim(0), rows * cols), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const std::size_t gh = rows * (h + 1) + 1, gw = cols * (w + 1) + 1;
  Tensor grid({c, gh, gw}, pad);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t oy = (i / cols) * (h + 1) + 1, ox = (i % cols) * (w + 1) + 1;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) grid[(ch * gh + oy + y) * gw + ox + x] = batch.at(i, ch, y, x);
  }
  return grid;
}

/// Writes each mask of an (N,C,H,W) batch in [0,1] as "<prefix><i>.pgm"
/// (first channel; masks are channel-uniform).
inline void dump_masks(const std::filesystem::path& dir, const std::string& prefix, const Tensor& masks) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < masks.dim(0); ++i) {
    Tensor m = masks.item(i);
    const Tensor first({1, m.dim(2), m.dim(3)},
                       std::vector<double>(m.values().begin(), m.values().begin() + static_cast<std::ptrdiff_t>(m.dim(2) * m.dim(3))));
    write_pnm(dir / (prefix + std::to_string(i) + ".pgm"), first, 0.0, 1.0);
  }
}

}  // namespace xaigan
