#pragma once

// Flat binary raster files.
//
//   offset  size  field
//   0       4     magic: "SMR1" (u8 payload) or "SMF1" (f32 payload)
//   4       4     width   (u32 LE)
//   8       4     height  (u32 LE)
//   12      4     channels N (u32 LE)
//   16      4     resolution (f32 LE)
//   20      4     origin_x   (f32 LE)
//   24      4     origin_y   (f32 LE)
//   28      ...   N * height * width cells, channel-major, row-major
//
// Header reals are f32, so georeferencing survives a round trip only when it
// is f32-representable. NaN in SMF1 payloads is written as 0x7FC00000.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bevloc/core/error.hpp"
#include "bevloc/core/grid.hpp"
#include "bevloc/semantic_map.hpp"

namespace bevloc {

inline constexpr std::array<char, 4> kByteRasterMagic = {'S', 'M', 'R', '1'};
inline constexpr std::array<char, 4> kFloatRasterMagic = {'S', 'M', 'F', '1'};
inline constexpr std::size_t kRasterHeaderBytes = 28;
inline constexpr std::uint32_t kCanonicalNaN = 0x7FC00000u;

namespace detail {

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32(std::vector<char>& buf, float v) {
  put_u32(buf, std::isnan(v) ? kCanonicalNaN : std::bit_cast<std::uint32_t>(v));
}

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

inline float get_f32(const char* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), Errc::kIo, "write failed for " + path.string());
}

inline std::vector<char> encode_header(const std::array<char, 4>& magic, const GridGeometry& g, int channels) {
  std::vector<char> buf(magic.begin(), magic.end());
  put_u32(buf, static_cast<std::uint32_t>(g.width));
  put_u32(buf, static_cast<std::uint32_t>(g.height));
  put_u32(buf, static_cast<std::uint32_t>(channels));
  put_f32(buf, static_cast<float>(g.resolution));
  put_f32(buf, static_cast<float>(g.origin_x));
  put_f32(buf, static_cast<float>(g.origin_y));
  return buf;
}

struct DecodedHeader {
  GridGeometry geometry;
  int channels = 0;
  std::size_t cells = 0;
};

inline DecodedHeader decode_header(const std::vector<char>& bytes, const std::array<char, 4>& magic,
                                   std::size_t bytes_per_cell, const std::string& name) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), magic.data(), 4) == 0, Errc::kMagicMismatch,
          name + ": magic bytes do not match '" + std::string(magic.begin(), magic.end()) + "'");
  require(bytes.size() >= kRasterHeaderBytes, Errc::kMalformedHeader, name + ": header is incomplete");
  const std::uint32_t w = get_u32(bytes.data() + 4);
  const std::uint32_t h = get_u32(bytes.data() + 8);
  const std::uint32_t n = get_u32(bytes.data() + 12);
  const float res = get_f32(bytes.data() + 16);
  const float ox = get_f32(bytes.data() + 20);
  const float oy = get_f32(bytes.data() + 24);
  constexpr std::uint32_t kMaxDim = 1u << 20;
  require(w <= kMaxDim && h <= kMaxDim && n <= 4096, Errc::kMalformedHeader, name + ": implausible dimensions");
  require(std::isfinite(res) && res > 0.0f && std::isfinite(ox) && std::isfinite(oy), Errc::kMalformedHeader,
          name + ": resolution must be positive and georeferencing finite");
  DecodedHeader out;
  out.geometry = {static_cast<int>(w), static_cast<int>(h), res, ox, oy};
  out.channels = static_cast<int>(n);
  out.cells = static_cast<std::size_t>(w) * h * n;
  require(bytes.size() - kRasterHeaderBytes >= out.cells * bytes_per_cell, Errc::kTruncated,
          name + ": payload shorter than the header declares");
  require(bytes.size() - kRasterHeaderBytes == out.cells * bytes_per_cell, Errc::kMalformedHeader,
          name + ": trailing bytes after payload");
  return out;
}

}  // namespace detail

inline std::vector<char> encode_raster(const Raster<std::uint8_t>& r) {
  auto buf = detail::encode_header(kByteRasterMagic, r.geometry(), r.channels());
  buf.insert(buf.end(), r.data().begin(), r.data().end());
  return buf;
}

inline Raster<std::uint8_t> decode_raster(const std::vector<char>& bytes, const std::string& name = "raster") {
  const auto hdr = detail::decode_header(bytes, kByteRasterMagic, 1, name);
  Raster<std::uint8_t> r(hdr.geometry, hdr.channels);
  std::memcpy(r.data().data(), bytes.data() + kRasterHeaderBytes, hdr.cells);
  return r;
}

inline std::vector<char> encode_float_raster(const Raster<float>& r) {
  auto buf = detail::encode_header(kFloatRasterMagic, r.geometry(), r.channels());
  buf.reserve(buf.size() + 4 * r.data().size());
  for (float v : r.data()) detail::put_f32(buf, v);
  return buf;
}

inline Raster<float> decode_float_raster(const std::vector<char>& bytes, const std::string& name = "raster") {
  const auto hdr = detail::decode_header(bytes, kFloatRasterMagic, 4, name);
  Raster<float> r(hdr.geometry, hdr.channels);
  const char* p = bytes.data() + kRasterHeaderBytes;
  for (std::size_t i = 0; i < hdr.cells; ++i) r.data()[i] = detail::get_f32(p + 4 * i);
  return r;
}

inline void save_raster(const Raster<std::uint8_t>& r, const std::filesystem::path& path) {
  detail::write_file(path, encode_raster(r));
}

inline MapRaster load_raster(const std::filesystem::path& path) {
  return MapRaster(decode_raster(detail::read_file(path), path.string()));
}

inline void save_float_raster(const Raster<float>& r, const std::filesystem::path& path) {
  detail::write_file(path, encode_float_raster(r));
}

inline Raster<float> load_float_raster(const std::filesystem::path& path) {
  return decode_float_raster(detail::read_file(path), path.string());
}

/// Binary (P5) PGM; 16-bit samples are big-endian as the format requires.
inline void save_pgm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint16_t>& px,
                     std::uint16_t maxval) {
  require(px.size() == static_cast<std::size_t>(width) * height, Errc::kShapeMismatch, "PGM pixel count mismatch");
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" +
                       std::to_string(maxval) + "\n";
  std::vector<char> buf(header.begin(), header.end());
  for (std::uint16_t v : px) {
    if (maxval > 255) buf.push_back(static_cast<char>(v >> 8));
    buf.push_back(static_cast<char>(v & 0xFF));
  }
  detail::write_file(path, buf);
}

}  // namespace bevloc
