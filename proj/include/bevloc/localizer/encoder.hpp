#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bevloc/core/error.hpp"
#include "bevloc/core/grid.hpp"

namespace bevloc {

/// Channel-major feature stack produced by an encoder. `stride` is the
/// number of input cells per output cell.
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  int stride = 1;
  std::vector<double> data;

  FeatureGrid() = default;
  FeatureGrid(int rows_, int cols_, int channels_, int stride_ = 1, double fill = 0.0)
      : rows(rows_), cols(cols_), channels(channels_), stride(stride_),
        data(static_cast<std::size_t>(rows_) * cols_ * channels_, fill) {}

  std::size_t index(int k, int r, int c) const { return (static_cast<std::size_t>(k) * rows + r) * cols + c; }
  double& at(int k, int r, int c) { return data[index(k, r, c)]; }
  double at(int k, int r, int c) const { return data[index(k, r, c)]; }
  std::span<double> plane(int k) { return {data.data() + index(k, 0, 0), static_cast<std::size_t>(rows) * cols}; }
  std::span<const double> plane(int k) const {
    return {data.data() + index(k, 0, 0), static_cast<std::size_t>(rows) * cols};
  }
};

template <typename T>
FeatureGrid to_features(const Raster<T>& r) {
  FeatureGrid f(r.height(), r.width(), r.channels());
  for (std::size_t i = 0; i < r.data().size(); ++i) f.data[i] = static_cast<double>(r.data()[i]);
  return f;
}

/// Encoder selection. `resolution` (metres per input cell) only matters for
/// the distance encoder.
struct EncoderSpec {
  std::string name = "identity";
  int stride = 1;
  double resolution = 1.0;
  std::vector<int> box_sizes = {1, 5, 17};  ///< pyramid box widths in cells, odd
  double clamp_m = 10.0;                    ///< distance clamp

  void validate() const {
    require(name == "identity" || name == "pyramid" || name == "distance", Errc::kUnknownEncoder,
            "unknown encoder '" + name + "' (expected identity, pyramid or distance)");
    require(stride >= 1, Errc::kInvalidSpec, "encoder stride must be >= 1");
    require(name != "identity" || stride == 1, Errc::kInvalidSpec, "the identity encoder has stride 1");
    require(resolution > 0, Errc::kInvalidSpec, "encoder resolution must be positive");
    require(clamp_m > 0, Errc::kInvalidSpec, "distance clamp must be positive");
    for (int b : box_sizes) require(b >= 1 && b % 2 == 1, Errc::kInvalidSpec, "pyramid box sizes must be odd");
    require(!box_sizes.empty(), Errc::kInvalidSpec, "pyramid needs at least one box size");
  }

  int output_channels(int input_channels) const {
    return name == "pyramid" ? input_channels * static_cast<int>(box_sizes.size()) : input_channels;
  }
};

namespace detail {

/// Mean over the in-bounds part of a size x size box centred on each cell.
inline void box_mean(std::span<const double> in, int rows, int cols, int size, std::span<double> out) {
  const int h = size / 2;
  std::vector<double> integral(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0);
  auto I = [&](int r, int c) -> double& { return integral[static_cast<std::size_t>(r) * (cols + 1) + c]; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      I(r + 1, c + 1) = in[static_cast<std::size_t>(r) * cols + c] + I(r, c + 1) + I(r + 1, c) - I(r, c);
  for (int r = 0; r < rows; ++r) {
    const int r0 = std::max(0, r - h), r1 = std::min(rows, r + h + 1);
    for (int c = 0; c < cols; ++c) {
      const int c0 = std::max(0, c - h), c1 = std::min(cols, c + h + 1);
      const double sum = I(r1, c1) - I(r0, c1) - I(r1, c0) + I(r0, c0);
      out[static_cast<std::size_t>(r) * cols + c] = sum / ((r1 - r0) * (c1 - c0));
    }
  }
}

/// 1D squared Euclidean distance transform of sampled function f
/// (lower envelope of parabolas).
inline void edt_1d(std::span<const double> f, std::span<double> d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    auto intersect = [&](int p) {
      return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
    };
    double s = intersect(v[k]);
    while (s <= z[k]) {  // z[0] is -inf, so this stops at k = 0
      --k;
      s = intersect(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace detail

/// Squared distance (in cells) from every cell to the nearest cell with
/// seed[i] nonzero; infinity when there is none.
inline std::vector<double> squared_distance_transform(std::span<const std::uint8_t> seed, int rows, int cols) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = seed[i] ? 0.0 : kInf;
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> in(std::max(rows, cols)), out(std::max(rows, cols));
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) in[r] = g[static_cast<std::size_t>(r) * cols + c];
    detail::edt_1d(std::span(in).first(rows), std::span(out).first(rows), v, z);
    for (int r = 0; r < rows; ++r) g[static_cast<std::size_t>(r) * cols + c] = out[r];
  }
  for (int r = 0; r < rows; ++r) {
    std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(r) * cols, cols, in.begin());
    detail::edt_1d(std::span(in).first(cols), std::span(out).first(cols), v, z);
    std::copy_n(out.begin(), cols, g.begin() + static_cast<std::ptrdiff_t>(r) * cols);
  }
  return g;
}

/// Signed distance in metres: outside a set region the distance to the
/// nearest set cell, inside minus the distance to the nearest unset cell.
/// Cells count as set when >= 0.5. Clamped to [-clamp, clamp].
inline std::vector<double> signed_distance(std::span<const double> plane, int rows, int cols, double resolution,
                                           double clamp) {
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  std::vector<std::uint8_t> set(n), unset(n);
  for (std::size_t i = 0; i < n; ++i) {
    set[i] = plane[i] >= 0.5;
    unset[i] = !set[i];
  }
  const auto to_set = squared_distance_transform(set, rows, cols);
  const auto to_unset = squared_distance_transform(unset, rows, cols);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = set[i] ? -std::sqrt(to_unset[i]) * resolution : std::sqrt(to_set[i]) * resolution;
    out[i] = std::clamp(d, -clamp, clamp);
  }
  return out;
}

/// Applies the encoder to a channel-major grid. Output cell (r, c) is taken
/// from input cell (r * stride, c * stride).
inline FeatureGrid encode(const FeatureGrid& in, const EncoderSpec& spec) {
  spec.validate();
  require(in.rows > 0 && in.cols > 0 && in.channels > 0, Errc::kEmptyInput, "cannot encode an empty grid");
  if (spec.name == "identity") return in;

  const int s = spec.stride;
  const int out_rows = (in.rows + s - 1) / s, out_cols = (in.cols + s - 1) / s;
  const int per_channel = spec.name == "pyramid" ? static_cast<int>(spec.box_sizes.size()) : 1;
  FeatureGrid out(out_rows, out_cols, in.channels * per_channel, s);
  std::vector<double> full(static_cast<std::size_t>(in.rows) * in.cols);
  auto subsample = [&](int out_channel) {
    for (int r = 0; r < out_rows; ++r)
      for (int c = 0; c < out_cols; ++c)
        out.at(out_channel, r, c) = full[static_cast<std::size_t>(r * s) * in.cols + c * s];
  };
  for (int k = 0; k < in.channels; ++k) {
    if (spec.name == "pyramid") {
      for (int b = 0; b < per_channel; ++b) {
        detail::box_mean(in.plane(k), in.rows, in.cols, spec.box_sizes[b], full);
        subsample(k * per_channel + b);
      }
    } else {
      full = signed_distance(in.plane(k), in.rows, in.cols, spec.resolution, spec.clamp_m);
      subsample(k);
    }
  }
  return out;
}

/// Subsamples a row-major mask with the encoder stride.
inline std::vector<std::uint8_t> encode_mask(std::span<const std::uint8_t> mask, int rows, int cols, int stride) {
  const int out_rows = (rows + stride - 1) / stride, out_cols = (cols + stride - 1) / stride;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_rows) * out_cols);
  for (int r = 0; r < out_rows; ++r)
    for (int c = 0; c < out_cols; ++c)
      out[static_cast<std::size_t>(r) * out_cols + c] = mask[static_cast<std::size_t>(r * stride) * cols + c * stride];
  return out;
}

}  // namespace bevloc
