#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bevloc/core/grid.hpp"
#include "bevloc/core/parallel.hpp"
#include "bevloc/geometry.hpp"
#include "bevloc/synthworld/scene.hpp"
#include "bevloc/synthworld/world.hpp"

namespace bevloc {

/// What one camera sees: per-pixel label (kNoLabel for no hit) and height
/// above ground (NaN for no hit).
struct CameraObservation {
  Image<std::uint8_t> labels;
  Image<float> heights;
};

struct SurroundObservation {
  std::vector<CameraObservation> cameras;  ///< rig order
  std::vector<std::string> label_names;    ///< map categories, building, terrain
  int category_count = 0;                  ///< labels below this are map categories
};

/// Renders every camera of `rig` with the ego at `pose`. Each pixel carries
/// the label and height of the first surface its centre ray hits.
inline SurroundObservation render_surround(const Scene& scene, const CameraRig& rig, const EgoPose& pose,
                                           int threads = 1) {
  rig.validate();
  const World& world = scene.world();
  SurroundObservation obs;
  obs.label_names = world.label_names();
  obs.category_count = static_cast<int>(world.map.size());
  obs.cameras.resize(rig.size());

  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  struct RowJob {
    std::size_t cam;
    int row;
  };
  std::vector<RowJob> jobs;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto& k = rig.cameras[i].intrinsics;
    obs.cameras[i].labels = Image<std::uint8_t>(k.height, k.width, 1, kNoLabel);
    obs.cameras[i].heights = Image<float>(k.height, k.width, 1, std::numeric_limits<float>::quiet_NaN());
    for (int r = 0; r < k.height; ++r) jobs.push_back({i, r});
  }

  parallel_for(0, jobs.size(), threads, [&](std::size_t j) {
    const auto [ci, row] = jobs[j];
    const Camera& cam = rig.cameras[ci];
    const Vec3 center_ego = cam.extrinsics.center();
    const Vec2 center_map = pose.apply(center_ego.head<2>());
    const Vec3 origin(center_map.x(), center_map.y(), center_ego.z());
    auto& out = obs.cameras[ci];
    for (int col = 0; col < cam.intrinsics.width; ++col) {
      const Vec3 d_ego = pixel_ray(cam, col, row);
      const Vec3 d(c * d_ego.x() - s * d_ego.y(), s * d_ego.x() + c * d_ego.y(), d_ego.z());
      if (const auto hit = scene.cast(origin, d)) {
        out.labels.at(row, col) = static_cast<std::uint8_t>(hit->label);
        out.heights.at(row, col) = static_cast<float>(hit->height);
      }
    }
  });
  return obs;
}

inline SurroundObservation render_surround(const World& world, const CameraRig& rig, const EgoPose& pose,
                                           int threads = 1) {
  const Scene scene(world);
  return render_surround(scene, rig, pose, threads);
}

/// One-hot map-category features of a rendered camera (rows x cols x N).
/// Buildings, terrain and empty pixels get an all-zero feature.
inline Image<double> semantic_features(const CameraObservation& cam, int category_count) {
  const auto& labels = cam.labels;
  Image<double> f(labels.rows(), labels.cols(), category_count, 0.0);
  for (int r = 0; r < labels.rows(); ++r)
    for (int c = 0; c < labels.cols(); ++c) {
      const int l = labels.at(r, c);
      if (l < category_count) f.at(r, c, l) = 1.0;
    }
  return f;
}

}  // namespace bevloc
