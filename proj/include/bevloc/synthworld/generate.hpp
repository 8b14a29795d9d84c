#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bevloc/core/error.hpp"
#include "bevloc/core/random.hpp"
#include "bevloc/synthworld/world.hpp"

namespace bevloc {

/// Parameters of a procedurally generated street grid.
struct WorldSpec {
  std::uint64_t seed = 0;
  double extent = 800.0;          ///< side of the square world, metres
  double road_density = 12.0;     ///< roads per kilometre along each axis
  double road_width_min = 6.0;
  double road_width_max = 12.0;
  double walkway_width = 3.0;
  double walkway_elevation = 0.15;
  double building_height_min = 3.0;
  double building_height_max = 10.0;
  double building_probability = 0.7;
  double crossing_frequency = 0.5;       ///< chance that a junction arm gets a crosswalk
  double segment_drop_probability = 0.25;  ///< chance that a cross-street segment is omitted

  void validate() const {
    require(std::isfinite(extent) && extent > 0, Errc::kInvalidSpec, "world extent must be positive");
    require(road_density > 0 && std::lround(road_density * extent / 1000.0) >= 1, Errc::kInvalidSpec,
            "world spec asks for zero roads");
    require(road_width_min > 0 && road_width_max >= road_width_min, Errc::kInvalidSpec, "invalid road widths");
    require(walkway_width >= 0, Errc::kInvalidSpec, "walkway width must be non-negative");
    require(walkway_elevation >= -0.5 && walkway_elevation <= 3.0, Errc::kInvalidSpec,
            "walkway elevation must lie within [-0.5, 3] m");
    require(building_height_min > 0 && building_height_max >= building_height_min, Errc::kInvalidSpec,
            "invalid building height range");
    for (double p : {building_probability, crossing_frequency, segment_drop_probability})
      require(p >= 0 && p <= 1, Errc::kInvalidSpec, "probabilities must lie in [0, 1]");
  }
};

inline nlohmann::json spec_to_json(const WorldSpec& s) {
  return {{"seed", s.seed},
          {"extent", s.extent},
          {"road_density", s.road_density},
          {"road_width_min", s.road_width_min},
          {"road_width_max", s.road_width_max},
          {"walkway_width", s.walkway_width},
          {"walkway_elevation", s.walkway_elevation},
          {"building_height_min", s.building_height_min},
          {"building_height_max", s.building_height_max},
          {"building_probability", s.building_probability},
          {"crossing_frequency", s.crossing_frequency},
          {"segment_drop_probability", s.segment_drop_probability}};
}

/// Reads a spec, rejecting unknown keys. Missing keys keep `base` values.
inline WorldSpec spec_from_json(const nlohmann::json& j, WorldSpec base = {}) {
  require(j.is_object(), Errc::kInvalidSpec, "world spec must be an object");
  const nlohmann::json known = spec_to_json(base);
  try {
    for (const auto& [key, value] : j.items()) {
      require(known.contains(key), Errc::kInvalidSpec, "unknown world spec key '" + key + "'");
      if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "extent") base.extent = value.get<double>();
      else if (key == "road_density") base.road_density = value.get<double>();
      else if (key == "road_width_min") base.road_width_min = value.get<double>();
      else if (key == "road_width_max") base.road_width_max = value.get<double>();
      else if (key == "walkway_width") base.walkway_width = value.get<double>();
      else if (key == "walkway_elevation") base.walkway_elevation = value.get<double>();
      else if (key == "building_height_min") base.building_height_min = value.get<double>();
      else if (key == "building_height_max") base.building_height_max = value.get<double>();
      else if (key == "building_probability") base.building_probability = value.get<double>();
      else if (key == "crossing_frequency") base.crossing_frequency = value.get<double>();
      else if (key == "segment_drop_probability") base.segment_drop_probability = value.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kInvalidSpec, std::string("malformed world spec: ") + e.what());
  }
  return base;
}

namespace detail {

inline Polygon rect(double x0, double y0, double x1, double y1) {
  return {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
}

struct Interval {
  double lo;
  double hi;
};

/// Pieces of [lo, hi] left after removing the (disjoint) `cuts`.
inline std::vector<Interval> subtract(Interval whole, std::vector<Interval> cuts) {
  std::sort(cuts.begin(), cuts.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  double at = whole.lo;
  for (const auto& c : cuts) {
    if (c.lo > at) out.push_back({at, c.lo});
    at = std::max(at, c.hi);
  }
  if (whole.hi > at) out.push_back({at, whole.hi});
  return out;
}

struct Road {
  double center;
  double half_width;
  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
};

inline std::vector<Road> place_roads(int n, double extent, const WorldSpec& spec, Rng& rng) {
  const double half = extent / 2.0;
  const double spacing = extent / n;
  std::vector<Road> roads;
  for (int i = 0; i < n; ++i) {
    const double c = -half + (i + 0.5) * spacing + rng.uniform(-0.25, 0.25) * spacing;
    const double w = rng.uniform(spec.road_width_min, spec.road_width_max);
    roads.push_back({c, w / 2.0});
  }
  return roads;
}

}  // namespace detail

inline constexpr const char* kDrivable = "drivable";
inline constexpr const char* kWalkway = "walkway";
inline constexpr const char* kCrossing = "crossing";

/// Street-grid world: full-length north-south roads, east-west roads with
/// randomly omitted segments (giving T-junctions and merged blocks),
/// crosswalks on junction arms, raised walkway rings around blocks and box
/// buildings inside them. Ground categories never overlap one another.
/// Deterministic in `spec`.
inline World generate_world(const WorldSpec& spec) {
  using detail::Interval;
  using detail::rect;
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x5EED));
  const double half = spec.extent / 2.0;
  const int n = static_cast<int>(std::lround(spec.road_density * spec.extent / 1000.0));

  const auto vroads = detail::place_roads(n, spec.extent, spec, rng);  // constant x
  const auto hroads = detail::place_roads(n, spec.extent, spec, rng);  // constant y

  // Columns between north-south roads (n + 1 of them, outermost touch the edge).
  std::vector<Interval> cols, rows;
  for (int i = 0; i <= n; ++i) {
    cols.push_back({i == 0 ? -half : vroads[i - 1].hi(), i == n ? half : vroads[i].lo()});
    rows.push_back({i == 0 ? -half : hroads[i - 1].hi(), i == n ? half : hroads[i].lo()});
  }

  // kept[j][i]: segment of east-west road j inside column i exists.
  std::vector<std::vector<bool>> kept(n, std::vector<bool>(n + 1));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= n; ++i) kept[j][i] = !rng.bernoulli(spec.segment_drop_probability);
    kept[j][rng.uniform_int(0, n)] = true;
  }

  World world;
  world.map.categories = {kDrivable, kWalkway, kCrossing};
  world.map.polygons.resize(3);
  world.surface_heights = {0.0, spec.walkway_elevation, 0.0};
  world.extent = {-half, -half, half, half};
  auto& drivable = world.map.polygons[0];
  auto& walkway = world.map.polygons[1];
  auto& crossing = world.map.polygons[2];

  constexpr double kGap = 1.0;
  constexpr double kStripe = 3.0;
  constexpr double kMinArm = 2.0 * (kGap + kStripe) + 2.0;
  std::vector<std::vector<Interval>> vcuts(n);                                      // per NS road, along y
  std::vector<std::vector<std::vector<Interval>>> hcuts(n, std::vector<std::vector<Interval>>(n + 1));  // [j][i]

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool left = kept[j][i], right = kept[j][i + 1];
      if (!left && !right) continue;
      const auto& vr = vroads[i];
      const auto& hr = hroads[j];
      // North and south arms along the NS road.
      if (rows[j + 1].hi - rows[j + 1].lo >= kMinArm && rng.bernoulli(spec.crossing_frequency)) {
        const Interval cut{hr.hi() + kGap, hr.hi() + kGap + kStripe};
        vcuts[i].push_back(cut);
        crossing.push_back(rect(vr.lo(), cut.lo, vr.hi(), cut.hi));
      }
      if (rows[j].hi - rows[j].lo >= kMinArm && rng.bernoulli(spec.crossing_frequency)) {
        const Interval cut{hr.lo() - kGap - kStripe, hr.lo() - kGap};
        vcuts[i].push_back(cut);
        crossing.push_back(rect(vr.lo(), cut.lo, vr.hi(), cut.hi));
      }
      // West and east arms along the EW road.
      if (left && cols[i].hi - cols[i].lo >= kMinArm && rng.bernoulli(spec.crossing_frequency)) {
        const Interval cut{vr.lo() - kGap - kStripe, vr.lo() - kGap};
        hcuts[j][i].push_back(cut);
        crossing.push_back(rect(cut.lo, hr.lo(), cut.hi, hr.hi()));
      }
      if (right && cols[i + 1].hi - cols[i + 1].lo >= kMinArm && rng.bernoulli(spec.crossing_frequency)) {
        const Interval cut{vr.hi() + kGap, vr.hi() + kGap + kStripe};
        hcuts[j][i + 1].push_back(cut);
        crossing.push_back(rect(cut.lo, hr.lo(), cut.hi, hr.hi()));
      }
    }
  }

  for (int i = 0; i < n; ++i)
    for (const auto& piece : detail::subtract({-half, half}, vcuts[i]))
      drivable.push_back(rect(vroads[i].lo(), piece.lo, vroads[i].hi(), piece.hi));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= n; ++i) {
      if (!kept[j][i]) continue;
      for (const auto& piece : detail::subtract(cols[i], hcuts[j][i]))
        drivable.push_back(rect(piece.lo, hroads[j].lo(), piece.hi, hroads[j].hi()));
    }

  // Blocks: per column, row intervals merged across omitted segments.
  const double ww = spec.walkway_width;
  for (int i = 0; i <= n; ++i) {
    double y_start = rows[0].lo;
    for (int r = 0; r <= n; ++r) {
      const bool closes = (r == n) || kept[r][i];
      if (!closes) continue;
      const double x0 = cols[i].lo, x1 = cols[i].hi, y0 = y_start, y1 = rows[r].hi;
      if (r < n) y_start = rows[r + 1].lo;
      if (x1 - x0 < 2 * ww + 2 || y1 - y0 < 2 * ww + 2) continue;
      if (ww > 0) {
        walkway.push_back(rect(x0, y0, x1, y0 + ww));
        walkway.push_back(rect(x0, y1 - ww, x1, y1));
        walkway.push_back(rect(x0, y0 + ww, x0 + ww, y1 - ww));
        walkway.push_back(rect(x1 - ww, y0 + ww, x1, y1 - ww));
      }
      // Lots inside the walkway ring.
      const double setback = rng.uniform(2.0, 6.0);
      const double ix0 = x0 + ww + setback, ix1 = x1 - ww - setback;
      const double iy0 = y0 + ww + setback, iy1 = y1 - ww - setback;
      for (double lx = ix0; ix1 - lx >= 8.0;) {
        const double lot_w = std::min(rng.uniform(12.0, 25.0), ix1 - lx);
        for (double ly = iy0; iy1 - ly >= 8.0;) {
          const double lot_h = std::min(rng.uniform(12.0, 25.0), iy1 - ly);
          if (lot_w >= 8.0 && lot_h >= 8.0 && rng.bernoulli(spec.building_probability)) {
            const double m = 1.5;
            world.buildings.push_back({rect(lx + m, ly + m, lx + lot_w - m, ly + lot_h - m),
                                       rng.uniform(spec.building_height_min, spec.building_height_max)});
          }
          ly += lot_h;
        }
        lx += lot_w;
      }
    }
  }
  return world;
}

/// Random pose on a drivable surface at least `margin` metres inside the
/// world edge, heading along the road (either direction) with a small
/// random deviation.
inline EgoPose sample_drivable_pose(const World& world, Rng& rng, double margin) {
  const int k = world.map.category_index(kDrivable);
  require(k >= 0, Errc::kInvalidSpec, "world has no drivable category");
  const Bounds& e = world.extent;
  const double x0 = e.min_x + margin, x1 = e.max_x - margin;
  const double y0 = e.min_y + margin, y1 = e.max_y - margin;
  require(x1 > x0 && y1 > y0, Errc::kInvalidSpec, "world too small for the requested pose margin");
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double x = rng.uniform(x0, x1), y = rng.uniform(y0, y1);
    for (const auto& poly : world.map.polygons[k]) {
      if (!point_in_polygon(x, y, poly)) continue;
      const Bounds b = polygon_bounds(poly);
      const bool north_south = (b.max_y - b.min_y) > (b.max_x - b.min_x);
      double yaw = north_south ? std::numbers::pi / 2 : 0.0;
      if (rng.bernoulli(0.5)) yaw += std::numbers::pi;
      yaw += rng.uniform(-0.15, 0.15);
      return {x, y, yaw};
    }
  }
  fail(Errc::kInvalidSpec, "no drivable surface found inside the pose margin");
}

}  // namespace bevloc
