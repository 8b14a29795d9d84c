#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bevloc/core/grid.hpp"

namespace bevloc {

/// Uniform 2D bucket grid of object ids keyed by bounding box.
class BucketGrid {
 public:
  BucketGrid() = default;
  BucketGrid(const Bounds& bounds, double cell) : bounds_(bounds), cell_(cell) {
    nx_ = std::max(1, static_cast<int>(std::ceil((bounds.max_x - bounds.min_x) / cell)));
    ny_ = std::max(1, static_cast<int>(std::ceil((bounds.max_y - bounds.min_y) / cell)));
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
  }

  void insert(int id, const Bounds& b) {
    const int x0 = clamp_x(b.min_x), x1 = clamp_x(b.max_x);
    const int y0 = clamp_y(b.min_y), y1 = clamp_y(b.max_y);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) buckets_[static_cast<std::size_t>(y) * nx_ + x].push_back(id);
  }

  std::span<const int> bucket(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return {};
    return buckets_[static_cast<std::size_t>(iy) * nx_ + ix];
  }

  std::span<const int> at(double x, double y) const {
    if (!bounds_.contains(x, y)) return {};
    return bucket(clamp_x(x), clamp_y(y));
  }

  const Bounds& bounds() const { return bounds_; }
  double cell() const { return cell_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  int clamp_x(double x) const {
    return std::clamp(static_cast<int>(std::floor((x - bounds_.min_x) / cell_)), 0, nx_ - 1);
  }
  int clamp_y(double y) const {
    return std::clamp(static_cast<int>(std::floor((y - bounds_.min_y) / cell_)), 0, ny_ - 1);
  }

 private:
  Bounds bounds_;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace bevloc
