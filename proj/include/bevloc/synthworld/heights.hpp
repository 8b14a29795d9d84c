#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "bevloc/core/error.hpp"
#include "bevloc/core/grid.hpp"

namespace bevloc {

/// Discrete heights (metres above ground) at which features are projected.
inline std::vector<double> default_height_bins() { return {-0.5, 0.0, 0.5, 1.0, 2.0, 3.0}; }

inline void validate_bins(std::span<const double> bins) {
  require(!bins.empty(), Errc::kInvalidSpec, "height bins must not be empty");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    require(std::isfinite(bins[i]), Errc::kInvalidSpec, "height bins must be finite");
    if (i > 0) require(bins[i] > bins[i - 1], Errc::kInvalidSpec, "height bins must be strictly increasing");
  }
}

/// Soft assignment of height h over `bins`: linear interpolation between the
/// two neighbouring bins, one-hot on an exact bin value, clamped one-hot
/// outside the range, all zero for NaN.
inline void height_weights(double h, std::span<const double> bins, std::span<double> out) {
  for (double& w : out) w = 0.0;
  if (std::isnan(h)) return;
  const std::size_t n = bins.size();
  if (h <= bins[0]) {
    out[0] = 1.0;
    return;
  }
  if (h >= bins[n - 1]) {
    out[n - 1] = 1.0;
    return;
  }
  std::size_t hi = 1;
  while (bins[hi] < h) ++hi;
  if (bins[hi] == h) {
    out[hi] = 1.0;
    return;
  }
  const std::size_t lo = hi - 1;
  const double t = (h - bins[lo]) / (bins[hi] - bins[lo]);
  out[lo] = 1.0 - t;
  out[hi] = t;
}

/// Per-pixel height distribution of a height image (rows x cols x |bins|).
inline Image<double> height_to_distribution(const Image<float>& heights, std::span<const double> bins) {
  validate_bins(bins);
  require(heights.channels() == 1, Errc::kShapeMismatch, "height image must have one channel");
  Image<double> dist(heights.rows(), heights.cols(), static_cast<int>(bins.size()));
  for (int r = 0; r < heights.rows(); ++r)
    for (int c = 0; c < heights.cols(); ++c) height_weights(heights.at(r, c), bins, dist.pixel(r, c));
  return dist;
}

/// Probability-weighted height: sum_k bins[k] * weights[k].
inline double expected_height(std::span<const double> weights, std::span<const double> bins) {
  require(weights.size() == bins.size(), Errc::kShapeMismatch, "weights and bins differ in length");
  double h = 0.0;
  for (std::size_t k = 0; k < bins.size(); ++k) h += bins[k] * weights[k];
  return h;
}

}  // namespace bevloc
