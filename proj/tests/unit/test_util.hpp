#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>

#include "bevloc/bevloc.hpp"

namespace bevloc::testing {

/// Camera straight above `xy` at height `h`, looking down.
inline Camera nadir_camera(double h = 1.5, double f = 100.0, double c = 50.0, int size = 101) {
  return make_camera("nadir", {f, f, c, c, size, size}, Vec3(0, 0, h), 0.0, -std::numbers::pi / 2);
}

inline Camera forward_camera(double h, double pitch_deg, double f = 500.0, double cx = 272.0, double cy = 112.0,
                             int width = 544, int height = 224) {
  return make_camera("front", {f, f, cx, cy, width, height}, Vec3(0, 0, h), 0.0, deg2rad(pitch_deg));
}

/// Independent even-odd test with boundary points inside. Division-free,
/// so it is exact for coordinates on a coarse dyadic grid.
inline bool oracle_inside(double px, double py, const Polygon& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ax = poly[i].x(), ay = poly[i].y();
    const double bx = poly[(i + 1) % n].x(), by = poly[(i + 1) % n].y();
    const double cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    if (cross == 0.0 && px >= std::min(ax, bx) && px <= std::max(ax, bx) && py >= std::min(ay, by) &&
        py <= std::max(ay, by))
      return true;
    if ((ay > py) != (by > py)) {
      // px < crossing x, multiplied through by (by - ay) with its sign.
      const double lhs = (px - ax) * (by - ay), rhs = (py - ay) * (bx - ax);
      if (by > ay ? lhs < rhs : lhs > rhs) inside = !inside;
    }
  }
  return inside;
}

/// Random polygon with vertices on a 1/8 m grid inside [lo, hi]^2. Vertex
/// order is random, so polygons may be concave or self-intersecting.
inline Polygon random_dyadic_polygon(Rng& rng, double lo, double hi) {
  const int n = rng.uniform_int(3, 12);
  Polygon p;
  const int span = static_cast<int>((hi - lo) * 8);
  for (int i = 0; i < n; ++i)
    p.emplace_back(lo + rng.uniform_int(0, span) / 8.0, lo + rng.uniform_int(0, span) / 8.0);
  return p;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bevloc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace bevloc::testing
