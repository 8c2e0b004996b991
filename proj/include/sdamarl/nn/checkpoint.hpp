#pragma once

// Binary parameter checkpoints.
//
//   "SDAM"                      4 bytes
//   format version              u32 LE
//   number of widths            u32 LE
//   widths                      u32 LE each
//   [optional extra sections written by higher-level formats]
//   per layer: weights row-major, then bias      f64 LE each

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdamarl/nn/mlp.hpp"

namespace sdamarl::nn {

inline constexpr std::array<char, 4> kCheckpointMagic{'S', 'D', 'A', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), b.size());
}

inline void write_f64(std::ostream& os, double d) {
  auto v = std::bit_cast<std::uint64_t>(d);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), b.size());
}

inline std::uint32_t read_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw CheckpointError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw CheckpointError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

inline void write_tag(std::ostream& os, const std::array<char, 4>& tag) { os.write(tag.data(), tag.size()); }

inline void expect_tag(std::istream& is, const std::array<char, 4>& tag) {
  std::array<char, 4> got{};
  if (!is.read(got.data(), got.size()) || got != tag)
    throw CheckpointError(std::string("bad section tag, expected ") + std::string(tag.data(), tag.size()));
}

}  // namespace io

inline void write_header(std::ostream& os, const std::vector<std::size_t>& widths) {
  io::write_tag(os, kCheckpointMagic);
  io::write_u32(os, kCheckpointVersion);
  io::write_u32(os, static_cast<std::uint32_t>(widths.size()));
  for (auto w : widths) io::write_u32(os, static_cast<std::uint32_t>(w));
}

inline std::vector<std::size_t> read_header(std::istream& is) {
  io::expect_tag(is, kCheckpointMagic);
  auto version = io::read_u32(is);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  auto n = io::read_u32(is);
  if (n < 2 || n > 64) throw CheckpointError("implausible layer count in checkpoint");
  std::vector<std::size_t> widths(n);
  for (auto& w : widths) {
    w = io::read_u32(is);
    if (w == 0) throw CheckpointError("zero layer width in checkpoint");
  }
  return widths;
}

inline void write_params(std::ostream& os, const ParamSet& params) {
  for (double v : flatten(params)) io::write_f64(os, v);
}

inline void read_params(std::istream& is, ParamSet& params) {
  for (auto& l : params) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = io::read_f64(is);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = io::read_f64(is);
  }
}

inline void write_checkpoint(std::ostream& os, const Mlp& net) {
  write_header(os, net.widths());
  write_params(os, net.params());
  if (!os) throw CheckpointError("failed writing checkpoint");
}

/// Activations are not stored; the caller knows the role of the network.
inline Mlp read_checkpoint(std::istream& is, Activation hidden, Activation output) {
  Mlp net(read_header(is), hidden, output);
  ParamSet p = net.params();
  read_params(is, p);
  net.set_params(std::move(p));
  return net;
}

inline void save_checkpoint(const std::filesystem::path& path, const Mlp& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, net);
}

inline Mlp load_checkpoint(const std::filesystem::path& path, Activation hidden, Activation output) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(is, hidden, output);
}

}  // namespace sdamarl::nn
