#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "bevloc/core/bucket_grid.hpp"
#include "bevloc/synthworld/world.hpp"

namespace bevloc {

struct RayHit {
  double t = 0.0;       ///< distance along the (unit) ray
  double height = 0.0;  ///< z of the hit point
  int label = 0;
};

/// Analytic ray caster over a World: ray-plane hits for surfaces and
/// ray-wall hits for extruded polygons, accelerated by a 2D bucket grid
/// traversed in ray order.
class Scene {
 public:
  explicit Scene(const World& world, double bucket_size = 10.0) : world_(&world) {
    world.validate();
    Bounds all = world.extent.empty() ? Bounds{-1, -1, 1, 1} : world.extent;
    auto add_solid = [&](const Polygon& poly, double wall_lo, double wall_hi, double face_z, int label) {
      if (is_degenerate(poly)) return;
      solids_.push_back({&poly, polygon_bounds(poly), wall_lo, wall_hi, face_z, label});
      all = all.united(solids_.back().bbox);
      top_ = std::max(top_, std::max(wall_hi, face_z));
      floor_ = std::min(floor_, std::min(wall_lo, face_z));
    };
    for (std::size_t k = 0; k < world.map.size(); ++k) {
      const double h = world.surface_heights[k];
      for (const auto& poly : world.map.polygons[k]) {
        if (h > 0.0) {
          add_solid(poly, 0.0, h, h, static_cast<int>(k));
        } else if (h < 0.0) {
          add_solid(poly, h, 0.0, h, static_cast<int>(k));
          if (!is_degenerate(poly)) holes_.push_back({&poly, polygon_bounds(poly), 0, 0, 0, static_cast<int>(k)});
        } else if (!is_degenerate(poly)) {
          flats_.push_back({&poly, polygon_bounds(poly), 0, 0, 0, static_cast<int>(k)});
          all = all.united(flats_.back().bbox);
        }
      }
    }
    for (const auto& b : world.buildings) add_solid(b.footprint, 0.0, b.height, b.height, world.building_label());

    all = {all.min_x - 1.0, all.min_y - 1.0, all.max_x + 1.0, all.max_y + 1.0};
    solid_grid_ = BucketGrid(all, bucket_size);
    flat_grid_ = BucketGrid(all, bucket_size);
    for (std::size_t i = 0; i < solids_.size(); ++i) solid_grid_.insert(static_cast<int>(i), solids_[i].bbox);
    for (std::size_t i = 0; i < flats_.size(); ++i) flat_grid_.insert(static_cast<int>(i), flats_[i].bbox);
  }

  Scene(World&&, double = 10.0) = delete;  // holds pointers into the world

  /// Label of the ground (z = 0) at (x, y): the last category whose
  /// zero-height polygon contains the point, else terrain when the world has
  /// a ground plane, else nullopt.
  std::optional<int> ground_label(double x, double y) const {
    int best = -1;
    for (int id : flat_grid_.at(x, y)) {
      const auto& f = flats_[id];
      if (f.label > best && f.bbox.contains(x, y) && point_in_polygon(x, y, *f.poly)) best = f.label;
    }
    if (best >= 0) return best;
    if (world_->ground_plane) return world_->terrain_label();
    return std::nullopt;
  }

  /// First intersection of the ray origin + t * dir (dir unit length, t > 0).
  std::optional<RayHit> cast(const Vec3& origin, const Vec3& dir) const {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    RayHit best{kInf, 0.0, -1};

    // Parameter range in which the ray is within the vertical span of solids.
    double t_end = kInf;
    if (dir.z() < 0.0) {
      t_end = (std::min(floor_, 0.0) - origin.z()) / dir.z();
    } else if (dir.z() > 0.0) {
      t_end = origin.z() >= top_ ? 0.0 : (top_ - origin.z()) / dir.z();
    }
    if (!solids_.empty() && t_end > 0.0) traverse(origin, dir, t_end, best);

    if (dir.z() < 0.0) {
      const double t = -origin.z() / dir.z();
      if (t > kEps && t < best.t) {
        const double x = origin.x() + t * dir.x();
        const double y = origin.y() + t * dir.y();
        if (!in_hole(x, y)) {
          if (auto label = ground_label(x, y)) best = {t, 0.0, *label};
        }
      }
    }
    if (best.label < 0) return std::nullopt;
    return best;
  }

  const World& world() const { return *world_; }

 private:
  static constexpr double kEps = 1e-9;

  struct Item {
    const Polygon* poly;
    Bounds bbox;
    double wall_lo;
    double wall_hi;
    double face_z;
    int label;
  };

  bool in_hole(double x, double y) const {
    for (const auto& h : holes_)
      if (h.bbox.contains(x, y) && point_in_polygon(x, y, *h.poly)) return true;
    return false;
  }

  static void intersect(const Item& s, const Vec3& o, const Vec3& d, RayHit& best) {
    if (d.z() != 0.0) {
      const double t = (s.face_z - o.z()) / d.z();
      if (t > kEps && t < best.t) {
        const double x = o.x() + t * d.x(), y = o.y() + t * d.y();
        if (s.bbox.contains(x, y) && point_in_polygon(x, y, *s.poly)) best = {t, s.face_z, s.label};
      }
    }
    const Polygon& p = *s.poly;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& a = p[i];
      const Vec2& b = p[(i + 1) % n];
      const double ex = b.x() - a.x(), ey = b.y() - a.y();
      const double denom = d.x() * ey - d.y() * ex;
      if (denom == 0.0) continue;
      const double ax = a.x() - o.x(), ay = a.y() - o.y();
      const double t = (ax * ey - ay * ex) / denom;
      if (!(t > kEps && t < best.t)) continue;
      const double s_param = (ax * d.y() - ay * d.x()) / denom;
      if (s_param < 0.0 || s_param > 1.0) continue;
      const double z = o.z() + t * d.z();
      if (z < s.wall_lo || z > s.wall_hi) continue;
      best = {t, z, s.label};
    }
  }

  // 2D DDA over the solid bucket grid, stopping once the best hit lies
  // before the exit of the current bucket.
  void traverse(const Vec3& o, const Vec3& d, double t_end, RayHit& best) const {
    const Bounds& gb = solid_grid_.bounds();
    const double cell = solid_grid_.cell();
    const double planar = std::hypot(d.x(), d.y());
    if (planar < 1e-12) {
      for (int id : solid_grid_.at(o.x(), o.y())) intersect(solids_[id], o, d, best);
      return;
    }
    // Clip to the grid box.
    double t0 = 0.0, t1 = t_end;
    for (int axis = 0; axis < 2; ++axis) {
      const double oc = axis == 0 ? o.x() : o.y();
      const double dc = axis == 0 ? d.x() : d.y();
      const double lo = axis == 0 ? gb.min_x : gb.min_y;
      const double hi = axis == 0 ? gb.max_x : gb.max_y;
      if (dc == 0.0) {
        if (oc < lo || oc > hi) return;
        continue;
      }
      double ta = (lo - oc) / dc, tb = (hi - oc) / dc;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (t0 > t1) return;

    const double sx = o.x() + t0 * d.x(), sy = o.y() + t0 * d.y();
    int ix = solid_grid_.clamp_x(sx), iy = solid_grid_.clamp_y(sy);
    const int step_x = d.x() > 0 ? 1 : (d.x() < 0 ? -1 : 0);
    const int step_y = d.y() > 0 ? 1 : (d.y() < 0 ? -1 : 0);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    auto boundary_t = [&](int i, int step, double origin_c, double dir_c, double lo) {
      if (step == 0) return kInf;
      const double edge = lo + (step > 0 ? i + 1 : i) * cell;
      return (edge - origin_c) / dir_c;
    };
    double next_x = boundary_t(ix, step_x, o.x(), d.x(), gb.min_x);
    double next_y = boundary_t(iy, step_y, o.y(), d.y(), gb.min_y);
    const double delta_x = step_x == 0 ? kInf : cell / std::abs(d.x());
    const double delta_y = step_y == 0 ? kInf : cell / std::abs(d.y());

    while (true) {
      for (int id : solid_grid_.bucket(ix, iy)) intersect(solids_[id], o, d, best);
      const double exit = std::min(next_x, next_y);
      if (best.t <= exit || exit > t1) return;
      if (next_x < next_y) {
        ix += step_x;
        next_x += delta_x;
      } else {
        iy += step_y;
        next_y += delta_y;
      }
      if (ix < 0 || iy < 0 || ix >= solid_grid_.nx() || iy >= solid_grid_.ny()) return;
    }
  }

  const World* world_;
  std::vector<Item> solids_;
  std::vector<Item> flats_;
  std::vector<Item> holes_;
  BucketGrid solid_grid_;
  BucketGrid flat_grid_;
  double top_ = 0.0;
  double floor_ = 0.0;
};

}  // namespace bevloc
