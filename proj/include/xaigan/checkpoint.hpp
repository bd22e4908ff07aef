#pragma once

// Flat binary checkpoint:
//
//   "XGAN1"
//   repeated until EOF:
//     u32  name length       (little-endian)
//     ...  name bytes
//     u32  rank
//     u64  dims[rank]
//     f64  values[prod(dims)] (little-endian IEEE-754)
//
// Writes go to "<path>.tmp" and are renamed into place, so an interrupted
// write never replaces the last good checkpoint.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xaigan/network.hpp"

namespace xaigan {

inline constexpr char kCheckpointMagic[] = "XGAN1";

struct NamedTensor {
  std::string name;
  Tensor value;
};

namespace detail {

template <class T>
void write_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
bool read_le(std::istream& is, T& v) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return true;
}

}  // namespace detail

inline void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("io", "cannot open " + tmp.string() + " for writing");
    os.write(kCheckpointMagic, 5);
    for (const NamedTensor& t : tensors) {
      detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
      os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rank()));
      for (std::size_t d : t.value.shape()) detail::write_le<std::uint64_t>(os, d);
      for (double v : t.value.values()) detail::write_le<double>(os, v);
    }
    os.flush();
    if (!os) throw FormatError("io", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("io", "cannot open " + path.string());
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, kCheckpointMagic, 5) != 0)
    throw FormatError("bad_magic", path.string() + ": not an XGAN1 checkpoint");
  std::vector<NamedTensor> out;
  std::uint32_t name_len = 0;
  while (detail::read_le(is, name_len)) {
    std::string name(name_len, '\0');
    std::uint32_t rank = 0;
    if (!is.read(name.data(), name_len) || !detail::read_le(is, rank) || rank == 0)
      throw FormatError("truncated", path.string() + ": truncated record header");
    Shape shape(rank);
    for (std::size_t& d : shape) {
      std::uint64_t v = 0;
      if (!detail::read_le(is, v) || v == 0) throw FormatError("truncated", path.string() + ": bad dims for " + name);
      d = static_cast<std::size_t>(v);
    }
    Tensor t(shape);
    for (double& v : t.values())
      if (!detail::read_le(is, v)) throw FormatError("truncated", path.string() + ": truncated payload for " + name);
    out.push_back({std::move(name), std::move(t)});
  }
  return out;
}

/// Collects the full state of several networks, names prefixed "<prefix>.".
inline std::vector<NamedTensor> snapshot(std::vector<std::pair<std::string, Network*>> nets) {
  std::vector<NamedTensor> out;
  for (auto& [prefix, net] : nets)
    for (const ParamRef& p : net->state()) out.push_back({prefix + "." + p.name, *p.value});
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, std::vector<std::pair<std::string, Network*>> nets) {
  write_checkpoint(path, snapshot(std::move(nets)));
}

/// Restores every tensor of the given networks; the file must match exactly.
inline void load_checkpoint(const std::filesystem::path& path, std::vector<std::pair<std::string, Network*>> nets) {
  std::map<std::string, Tensor> stored;
  for (NamedTensor& t : read_checkpoint(path)) stored.emplace(std::move(t.name), std::move(t.value));
  std::size_t used = 0;
  for (auto& [prefix, net] : nets)
    for (const ParamRef& p : net->state()) {
      const std::string name = prefix + "." + p.name;
      auto it = stored.find(name);
      if (it == stored.end()) throw FormatError("missing_tensor", path.string() + ": no tensor " + name);
      if (it->second.shape() != p.value->shape()) throw ShapeError("checkpoint " + name, p.value->shape(), it->second.shape());
      *p.value = it->second;
      ++used;
    }
  if (used != stored.size())
    throw FormatError("extra_tensor", path.string() + ": holds " + std::to_string(stored.size() - used) + " unknown tensors");
}

}  // namespace xaigan
