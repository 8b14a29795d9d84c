#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bevloc/core/error.hpp"

namespace bevloc {

/// Dense rows x cols x channels array stored pixel-interleaved (HWC).
/// Used for camera-space data: semantic labels, heights, features and
/// per-pixel height distributions.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, int channels, T fill = T{})
      : rows_(rows), cols_(cols), channels_(channels),
        data_(static_cast<std::size_t>(rows) * cols * channels, fill) {
    require(rows >= 0 && cols >= 0 && channels >= 0, Errc::kInvalidArgument,
            "image dimensions must be non-negative");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::size_t index(int r, int c, int k = 0) const {
    return (static_cast<std::size_t>(r) * cols_ + c) * channels_ + k;
  }
  T& at(int r, int c, int k = 0) { return data_[index(r, c, k)]; }
  const T& at(int r, int c, int k = 0) const { return data_[index(r, c, k)]; }

  std::span<T> pixel(int r, int c) { return {data_.data() + index(r, c), static_cast<std::size_t>(channels_)}; }
  std::span<const T> pixel(int r, int c) const {
    return {data_.data() + index(r, c), static_cast<std::size_t>(channels_)};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Image& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

/// Axis-aligned metric rectangle.
struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool empty() const { return !(max_x > min_x && max_y > min_y); }
  bool contains(double x, double y) const { return x >= min_x && x <= max_x && y >= min_y && y <= max_y; }
  Bounds united(const Bounds& o) const {
    return {std::min(min_x, o.min_x), std::min(min_y, o.min_y), std::max(max_x, o.max_x), std::max(max_y, o.max_y)};
  }
};

/// Placement of a regular grid in a metric frame. Cell (row, col) is centred
/// at (origin_x + col * resolution, origin_y + row * resolution): columns run
/// along +x, rows along +y.
struct GridGeometry {
  int width = 0;
  int height = 0;
  double resolution = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  double center_x(int col) const { return origin_x + col * resolution; }
  double center_y(int row) const { return origin_y + row * resolution; }
  std::size_t cell_count() const { return static_cast<std::size_t>(width) * height; }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Georeferenced multi-channel grid, stored channel-major and row-major
/// within a channel (the same order as the on-disk payload).
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(GridGeometry geometry, int channels, T fill = T{})
      : geometry_(geometry), channels_(channels), data_(geometry.cell_count() * channels, fill) {
    require(geometry.width >= 0 && geometry.height >= 0 && channels >= 0, Errc::kInvalidArgument,
            "raster dimensions must be non-negative");
    require(geometry.resolution > 0 && std::isfinite(geometry.resolution), Errc::kInvalidArgument,
            "raster resolution must be positive");
  }

  const GridGeometry& geometry() const { return geometry_; }
  GridGeometry& geometry() { return geometry_; }
  int width() const { return geometry_.width; }
  int height() const { return geometry_.height; }
  int channels() const { return channels_; }
  double resolution() const { return geometry_.resolution; }

  std::size_t index(int k, int r, int c) const {
    return (static_cast<std::size_t>(k) * geometry_.height + r) * geometry_.width + c;
  }
  T& at(int k, int r, int c) { return data_[index(k, r, c)]; }
  const T& at(int k, int r, int c) const { return data_[index(k, r, c)]; }

  bool contains(int r, int c) const { return r >= 0 && c >= 0 && r < height() && c < width(); }

  std::span<T> plane(int k) { return {data_.data() + index(k, 0, 0), geometry_.cell_count()}; }
  std::span<const T> plane(int k) const { return {data_.data() + index(k, 0, 0), geometry_.cell_count()}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  GridGeometry geometry_;
  int channels_ = 0;
  std::vector<T> data_;
};

/// Row-major 2D array of doubles without georeferencing (similarity and
/// probability maps).
class Grid2 {
 public:
  Grid2() = default;
  Grid2(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace bevloc
