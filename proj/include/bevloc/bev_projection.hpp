#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bevloc/core/error.hpp"
#include "bevloc/core/grid.hpp"
#include "bevloc/core/parallel.hpp"
#include "bevloc/geometry.hpp"
#include "bevloc/semantic_map.hpp"
#include "bevloc/synthworld/heights.hpp"
#include "bevloc/synthworld/world.hpp"

namespace bevloc {

/// Square ego-centred BEV grid. Cell (r, c) is centred at
/// ((c - S/2) * resolution, (r - S/2) * resolution) in the ego frame, so the
/// ego origin falls on cell (S/2, S/2).
struct BevSpec {
  double side = 100.0;
  double resolution = 0.5;
  std::vector<double> bins = default_height_bins();

  int size() const { return static_cast<int>(std::lround(side / resolution)); }

  void validate() const {
    require(side > 0 && resolution > 0 && std::isfinite(side) && std::isfinite(resolution), Errc::kInvalidSpec,
            "BEV side and resolution must be positive");
    require(std::abs(side / resolution - size()) < 1e-9 * size() + 1e-9, Errc::kInvalidSpec,
            "BEV side must be an integer number of cells");
    validate_bins(bins);
  }

  double center(int index) const { return (index - size() / 2) * resolution; }

  GridGeometry geometry() const {
    const double o = -(size() / 2) * resolution;
    return {size(), size(), resolution, o, o};
  }
};

/// S x S x K x C accumulated features and S x S x K accumulated weights.
class OccupancyVolume {
 public:
  OccupancyVolume() = default;
  OccupancyVolume(int size, int bins, int channels)
      : size_(size), bins_(bins), channels_(channels),
        features_(static_cast<std::size_t>(size) * size * bins * channels, 0.0),
        weights_(static_cast<std::size_t>(size) * size * bins, 0.0) {}

  int size() const { return size_; }
  int bins() const { return bins_; }
  int channels() const { return channels_; }

  double& feature(int r, int c, int k, int ch) { return features_[feature_index(r, c, k, ch)]; }
  double feature(int r, int c, int k, int ch) const { return features_[feature_index(r, c, k, ch)]; }
  double& weight(int r, int c, int k) { return weights_[weight_index(r, c, k)]; }
  double weight(int r, int c, int k) const { return weights_[weight_index(r, c, k)]; }

  const std::vector<double>& features() const { return features_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::size_t weight_index(int r, int c, int k) const {
    return (static_cast<std::size_t>(r) * size_ + c) * bins_ + k;
  }
  std::size_t feature_index(int r, int c, int k, int ch) const { return weight_index(r, c, k) * channels_ + ch; }

  int size_ = 0;
  int bins_ = 0;
  int channels_ = 0;
  std::vector<double> features_;
  std::vector<double> weights_;
};

/// S x S x N scores plus the observability mask.
struct BevGrid {
  Raster<double> scores;
  std::vector<std::uint8_t> mask;  ///< row-major, 1 where observed

  int size() const { return scores.width(); }
  int channels() const { return scores.channels(); }
  bool observed(int r, int c) const { return mask[static_cast<std::size_t>(r) * scores.width() + c] != 0; }
};

namespace detail {

/// Bilinear weights of (u, v) over an image of the given size; false when
/// outside [0, cols-1] x [0, rows-1].
struct Bilinear {
  int r0, c0, r1, c1;
  double wu, wv;
};

inline bool bilinear(double u, double v, int rows, int cols, Bilinear& b) {
  if (!(u >= 0.0 && v >= 0.0 && u <= cols - 1 && v <= rows - 1)) return false;
  b.c0 = static_cast<int>(u);
  b.r0 = static_cast<int>(v);
  b.c1 = std::min(b.c0 + 1, cols - 1);
  b.r1 = std::min(b.r0 + 1, rows - 1);
  b.wu = u - b.c0;
  b.wv = v - b.r0;
  return true;
}

template <typename T>
double sample(const Image<T>& img, const Bilinear& b, int ch) {
  const double a = img.at(b.r0, b.c0, ch), bb = img.at(b.r0, b.c1, ch);
  const double c = img.at(b.r1, b.c0, ch), d = img.at(b.r1, b.c1, ch);
  return (1 - b.wv) * ((1 - b.wu) * a + b.wu * bb) + b.wv * ((1 - b.wu) * c + b.wu * d);
}

}  // namespace detail

/// Splats per-camera features into the height-layered volume. For every BEV
/// cell centre, bin height b_k and camera (in rig order) the lifted point
/// (x, y, b_k) is projected; inside the image and in front of the camera the
/// bilinearly sampled feature times H(u, v, k) is added to layer k and
/// H(u, v, k) to its weight.
///
/// `features[i]` is rows x cols x C and `heights[i]` rows x cols x K for
/// camera i. Image sizes need not equal the intrinsics when the rig was
/// built for a downsampled level (see pyramid_level).
inline OccupancyVolume project_to_volume(std::span<const Image<double>> features,
                                         std::span<const Image<double>> heights, const CameraRig& rig,
                                         const BevSpec& spec, int threads = 1) {
  spec.validate();
  rig.validate();
  require(features.size() == rig.size() && heights.size() == rig.size(), Errc::kShapeMismatch,
          "need one feature image and one height distribution per camera");
  const int bins = static_cast<int>(spec.bins.size());
  const int channels = features.empty() ? 0 : features[0].channels();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto& k = rig.cameras[i].intrinsics;
    require(features[i].rows() == k.height && features[i].cols() == k.width, Errc::kShapeMismatch,
            "feature image of camera '" + rig.cameras[i].name + "' does not match its intrinsics");
    require(heights[i].same_shape(features[i]), Errc::kShapeMismatch,
            "height distribution and features differ in size for camera '" + rig.cameras[i].name + "'");
    require(features[i].channels() == channels, Errc::kShapeMismatch, "cameras disagree on feature channels");
    require(heights[i].channels() == bins, Errc::kShapeMismatch, "height distribution does not match the bins");
  }

  std::vector<std::vector<PlaneProjector>> projectors(rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i)
    for (double b : spec.bins) projectors[i].emplace_back(rig.cameras[i], HeightLift{b});

  const int s = spec.size();
  OccupancyVolume vol(s, bins, channels);
  parallel_for(0, static_cast<std::size_t>(s), threads, [&](std::size_t row) {
    const int r = static_cast<int>(row);
    const double y = spec.center(r);
    detail::Bilinear b{};
    for (int c = 0; c < s; ++c) {
      const double x = spec.center(c);
      for (int k = 0; k < bins; ++k) {
        for (std::size_t i = 0; i < rig.size(); ++i) {
          const auto p = projectors[i][k].project(x, y);
          if (!p) continue;
          const auto& f = features[i];
          if (!detail::bilinear(p->u, p->v, f.rows(), f.cols(), b)) continue;
          const double w = detail::sample(heights[i], b, k);
          if (w == 0.0) continue;
          vol.weight(r, c, k) += w;
          for (int ch = 0; ch < channels; ++ch) vol.feature(r, c, k, ch) += detail::sample(f, b, ch) * w;
        }
      }
    }
  });
  return vol;
}

/// Collapses the height axis: score = sum_k acc_k / sum_k w_k per channel,
/// zero where no weight arrived; the mask marks cells with any weight.
inline BevGrid flatten_volume(const OccupancyVolume& vol, const GridGeometry& geometry, int threads = 1) {
  require(geometry.width == vol.size() && geometry.height == vol.size(), Errc::kShapeMismatch,
          "grid geometry does not match the volume");
  BevGrid out;
  out.scores = Raster<double>(geometry, vol.channels(), 0.0);
  out.mask.assign(geometry.cell_count(), 0);
  const int s = vol.size();
  parallel_for(0, static_cast<std::size_t>(s), threads, [&](std::size_t row) {
    const int r = static_cast<int>(row);
    for (int c = 0; c < s; ++c) {
      double total = 0.0;
      for (int k = 0; k < vol.bins(); ++k) total += vol.weight(r, c, k);
      if (!(total > 0.0)) continue;
      out.mask[static_cast<std::size_t>(r) * s + c] = 1;
      for (int ch = 0; ch < vol.channels(); ++ch) {
        double acc = 0.0;
        for (int k = 0; k < vol.bins(); ++k) acc += vol.feature(r, c, k, ch);
        out.scores.at(ch, r, c) = acc / total;
      }
    }
  });
  return out;
}

inline BevGrid flatten_volume(const OccupancyVolume& vol, const BevSpec& spec, int threads = 1) {
  return flatten_volume(vol, spec.geometry(), threads);
}

/// Ground-truth BEV: the map sampled at each BEV cell centre mapped into the
/// map frame by `pose`. Mask all true.
inline BevGrid oracle_bev(const SemanticMap& map, const EgoPose& pose, const BevSpec& spec) {
  spec.validate();
  // Sampling the pose-transformed map at ego-frame centres keeps the
  // containment test identical to rasterize() of that map.
  const EgoPose to_ego = invert_pose(pose);
  const SemanticMap local = map.transformed([&](const Vec2& p) { return to_ego.apply(p); });
  const MapRaster r = rasterize(local, spec.geometry());
  BevGrid out;
  out.scores = Raster<double>(spec.geometry(), r.channels(), 0.0);
  for (std::size_t i = 0; i < r.data().size(); ++i) out.scores.data()[i] = r.data()[i];
  out.mask.assign(spec.geometry().cell_count(), 1);
  return out;
}

inline BevGrid oracle_bev(const World& world, const EgoPose& pose, const BevSpec& spec) {
  return oracle_bev(world.map, pose, spec);
}

/// Box-downsamples an image by an integer stride (partial border blocks are
/// dropped, matching CameraIntrinsics::downsampled).
inline Image<double> box_downsample(const Image<double>& img, int stride) {
  require(stride >= 1, Errc::kInvalidArgument, "stride must be >= 1");
  const int rows = img.rows() / stride, cols = img.cols() / stride;
  Image<double> out(rows, cols, img.channels(), 0.0);
  const double norm = 1.0 / (static_cast<double>(stride) * stride);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < img.channels(); ++k) {
        double acc = 0.0;
        for (int dr = 0; dr < stride; ++dr)
          for (int dc = 0; dc < stride; ++dc) acc += img.at(r * stride + dr, c * stride + dc, k);
        out.at(r, c, k) = acc * norm;
      }
  return out;
}

/// Rig whose intrinsics describe images downsampled by `stride`.
inline CameraRig pyramid_level(const CameraRig& rig, int stride) {
  CameraRig out = rig;
  for (auto& cam : out.cameras) cam.intrinsics = cam.intrinsics.downsampled(stride);
  return out;
}

/// Projects features downsampled by `stride` into a BEV whose resolution is
/// coarsened by the same factor (one level of a multi-scale pyramid).
inline BevGrid project_level(std::span<const Image<double>> features, std::span<const Image<double>> heights,
                             const CameraRig& rig, const BevSpec& spec, int stride, int threads = 1) {
  std::vector<Image<double>> f, h;
  for (const auto& img : features) f.push_back(box_downsample(img, stride));
  for (const auto& img : heights) h.push_back(box_downsample(img, stride));
  BevSpec coarse = spec;
  coarse.resolution = spec.resolution * stride;
  const CameraRig level = pyramid_level(rig, stride);
  return flatten_volume(project_to_volume(f, h, level, coarse, threads), coarse, threads);
}

}  // namespace bevloc
