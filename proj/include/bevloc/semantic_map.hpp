#pragma once

// Polygonal semantic maps, their rasterization into boolean channels and
// prior-centred tile cropping.
//
// Fill rule: a cell is set when its centre lies inside a polygon under the
// even-odd rule; centres lying exactly on an edge count as inside.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevloc/core/error.hpp"
#include "bevloc/core/grid.hpp"
#include "bevloc/core/parallel.hpp"
#include "bevloc/geometry.hpp"

namespace bevloc {

using Polygon = std::vector<Vec2>;

struct SemanticMap {
  std::vector<std::string> categories;
  std::vector<std::vector<Polygon>> polygons;  ///< indexed like `categories`

  std::size_t size() const { return categories.size(); }

  int category_index(const std::string& name) const {
    const auto it = std::find(categories.begin(), categories.end(), name);
    return it == categories.end() ? -1 : static_cast<int>(it - categories.begin());
  }

  /// Copy with every vertex mapped through `f`.
  template <typename F>
  SemanticMap transformed(F&& f) const {
    SemanticMap out = *this;
    for (auto& cat : out.polygons)
      for (auto& poly : cat)
        for (auto& v : poly) v = f(v);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Polygon predicates
// ---------------------------------------------------------------------------

inline double signed_area(const Polygon& poly) {
  double twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

inline bool is_degenerate(const Polygon& poly) {
  return poly.size() < 3 || !(std::abs(signed_area(poly)) > 1e-12);
}

inline Bounds polygon_bounds(const Polygon& poly) {
  Bounds b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& v : poly) {
    b.min_x = std::min(b.min_x, v.x());
    b.min_y = std::min(b.min_y, v.y());
    b.max_x = std::max(b.max_x, v.x());
    b.max_y = std::max(b.max_y, v.y());
  }
  return b;
}

/// True when (px, py) lies on the closed segment [a, b].
inline bool on_segment(double px, double py, const Vec2& a, const Vec2& b) {
  const double cross = (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
  if (cross != 0.0) return false;
  return px >= std::min(a.x(), b.x()) && px <= std::max(a.x(), b.x()) && py >= std::min(a.y(), b.y()) &&
         py <= std::max(a.y(), b.y());
}

/// Horizontal crossing of edge (a, b) with the line y = py. Only meaningful
/// when (a.y > py) != (b.y > py).
inline double edge_crossing_x(double py, const Vec2& a, const Vec2& b) {
  return a.x() + (py - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
}

/// Even-odd containment with boundary points counted as inside.
inline bool point_in_polygon(double px, double py, const Polygon& poly) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if (on_segment(px, py, a, b)) return true;
    if ((a.y() > py) != (b.y() > py) && px < edge_crossing_x(py, a, b)) inside = !inside;
  }
  return inside;
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

/// Boolean N-channel raster of a SemanticMap.
struct MapRaster : Raster<std::uint8_t> {
  using Raster<std::uint8_t>::Raster;
  MapRaster() = default;
  explicit MapRaster(Raster<std::uint8_t> r) : Raster<std::uint8_t>(std::move(r)) {}

  std::size_t skipped_degenerate = 0;  ///< zero-area polygons ignored while filling
};

namespace detail {

/// Cell-centre coordinates. Regular grids use origin + i * res; lattice grids
/// use (first + i) * res so that the same global cell always gets the same
/// floating-point centre regardless of which crop it belongs to.
struct AxisCenters {
  double origin = 0.0;
  double resolution = 1.0;
  long long lattice_first = 0;
  bool lattice = false;

  double operator()(long long i) const {
    return lattice ? static_cast<double>(lattice_first + i) * resolution : origin + static_cast<double>(i) * resolution;
  }
  /// Approximate fractional index of coordinate v (exact comparisons follow).
  double index_of(double v) const {
    return lattice ? v / resolution - static_cast<double>(lattice_first) : (v - origin) / resolution;
  }
};

/// First index i in [0, n] with centers(i) >= v.
inline int first_at_or_above(const AxisCenters& centers, int n, double v) {
  double guess = std::ceil(centers.index_of(v));
  if (!(guess > -1.0)) guess = 0.0;
  if (guess > n) guess = n;
  int i = static_cast<int>(guess);
  while (i > 0 && centers(i - 1) >= v) --i;
  while (i < n && centers(i) < v) ++i;
  return i;
}

inline void rasterize_into(const SemanticMap& map, const AxisCenters& xs, const AxisCenters& ys, MapRaster& out,
                           int threads) {
  const int width = out.width();
  const int height = out.height();
  require(map.polygons.size() == map.categories.size(), Errc::kInvalidSpec,
          "semantic map has mismatched category and polygon lists");

  struct Item {
    int channel;
    const Polygon* poly;
    int row_lo;
    int row_hi;  // inclusive
  };
  std::vector<Item> items;
  for (std::size_t k = 0; k < map.polygons.size(); ++k) {
    for (const auto& poly : map.polygons[k]) {
      if (is_degenerate(poly)) {
        ++out.skipped_degenerate;
        continue;
      }
      const Bounds b = polygon_bounds(poly);
      const int lo = first_at_or_above(ys, height, b.min_y);
      int hi = first_at_or_above(ys, height, b.max_y);
      if (hi < height && ys(hi) == b.max_y) ++hi;  // closed upper bound
      if (lo < hi) items.push_back({static_cast<int>(k), &poly, lo, hi - 1});
    }
  }

  parallel_for(0, static_cast<std::size_t>(height), threads, [&](std::size_t row_index) {
    const int r = static_cast<int>(row_index);
    const double py = ys(r);
    std::vector<double> crossings;
    for (const auto& item : items) {
      if (r < item.row_lo || r > item.row_hi) continue;
      const Polygon& poly = *item.poly;
      const std::size_t n = poly.size();
      crossings.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if ((a.y() > py) != (b.y() > py)) crossings.push_back(edge_crossing_x(py, a, b));
      }
      std::sort(crossings.begin(), crossings.end());
      // Odd count of crossings strictly right of px <=> x[2i] <= px < x[2i+1].
      for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
        const int c0 = first_at_or_above(xs, width, crossings[i]);
        const int c1 = first_at_or_above(xs, width, crossings[i + 1]);
        for (int c = c0; c < c1; ++c) out.at(item.channel, r, c) = 1;
      }
      // Centres exactly on an edge.
      for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if (py < std::min(a.y(), b.y()) || py > std::max(a.y(), b.y())) continue;
        int c_lo, c_hi;
        if (a.y() == b.y()) {
          c_lo = first_at_or_above(xs, width, std::min(a.x(), b.x()));
          c_hi = first_at_or_above(xs, width, std::max(a.x(), b.x())) + 1;
        } else {
          const double x = (a.y() == py) ? a.x() : (b.y() == py) ? b.x() : edge_crossing_x(py, a, b);
          const int c = first_at_or_above(xs, width, x);
          c_lo = c - 1;
          c_hi = c + 2;
        }
        c_lo = std::max(c_lo, 0);
        c_hi = std::min(c_hi, width);
        for (int c = c_lo; c < c_hi; ++c)
          if (on_segment(xs(c), py, a, b)) out.at(item.channel, r, c) = 1;
      }
    }
  });
}

}  // namespace detail

/// Rasterizes every category of `map` over `bounds`. The grid has
/// ceil(extent / resolution) cells per axis; cell (0, 0) is centred half a
/// cell inside the lower-left corner of `bounds`.
inline MapRaster rasterize(const SemanticMap& map, const Bounds& bounds, double resolution, int threads = 1) {
  require(resolution > 0 && std::isfinite(resolution), Errc::kInvalidArgument, "resolution must be positive");
  require(!bounds.empty(), Errc::kInvalidArgument, "rasterization bounds are empty");
  GridGeometry g;
  g.resolution = resolution;
  g.width = static_cast<int>(std::ceil((bounds.max_x - bounds.min_x) / resolution - 1e-9));
  g.height = static_cast<int>(std::ceil((bounds.max_y - bounds.min_y) / resolution - 1e-9));
  g.origin_x = bounds.min_x + 0.5 * resolution;
  g.origin_y = bounds.min_y + 0.5 * resolution;
  MapRaster out(Raster<std::uint8_t>(g, static_cast<int>(map.size())));
  detail::rasterize_into(map, {g.origin_x, resolution}, {g.origin_y, resolution}, out, threads);
  return out;
}

/// Rasterizes onto an explicit grid geometry (cell centres origin + i * res).
inline MapRaster rasterize(const SemanticMap& map, const GridGeometry& g, int threads = 1) {
  MapRaster out(Raster<std::uint8_t>(g, static_cast<int>(map.size())));
  detail::rasterize_into(map, {g.origin_x, g.resolution}, {g.origin_y, g.resolution}, out, threads);
  return out;
}

/// Global cell lattice with centres at integer multiples of `resolution`.
/// Rasters built on it share bit-identical centres, so crops of the lattice
/// are pure shifts of each other.
struct LatticeWindow {
  long long first_col = 0;
  long long first_row = 0;
  int width = 0;
  int height = 0;
  double resolution = 1.0;

  GridGeometry geometry() const {
    return {width, height, resolution, static_cast<double>(first_col) * resolution,
            static_cast<double>(first_row) * resolution};
  }
};

inline MapRaster rasterize(const SemanticMap& map, const LatticeWindow& w, int threads = 1) {
  require(w.resolution > 0, Errc::kInvalidArgument, "resolution must be positive");
  MapRaster out(Raster<std::uint8_t>(w.geometry(), static_cast<int>(map.size())));
  detail::AxisCenters xs{0.0, w.resolution, w.first_col, true};
  detail::AxisCenters ys{0.0, w.resolution, w.first_row, true};
  detail::rasterize_into(map, xs, ys, out, threads);
  return out;
}

// ---------------------------------------------------------------------------
// Tiles
// ---------------------------------------------------------------------------

struct MapTile {
  MapRaster raster;
  EgoPose prior;
  LatticeWindow window;

  int side() const { return raster.width(); }
};

/// Window of side `cells` on the lattice whose centre is within half a cell
/// of (cx, cy).
inline LatticeWindow centered_window(double cx, double cy, int cells, double resolution) {
  const double half = (cells - 1) / 2.0;
  LatticeWindow w;
  w.first_col = std::llround(cx / resolution - half);
  w.first_row = std::llround(cy / resolution - half);
  w.width = w.height = cells;
  w.resolution = resolution;
  return w;
}

inline int tile_cells(double side, double resolution) {
  require(side > 0 && resolution > 0, Errc::kInvalidArgument, "tile side and resolution must be positive");
  return static_cast<int>(std::lround(side / resolution));
}

/// L x L x N tile, axis-aligned in the map frame and centred on the prior
/// position, L = round(side / resolution). Areas without polygons are zero.
inline MapTile crop_tile(const SemanticMap& map, const EgoPose& prior, double side, double resolution,
                         int threads = 1) {
  const int cells = tile_cells(side, resolution);
  MapTile tile;
  tile.prior = prior;
  tile.window = centered_window(prior.x, prior.y, cells, resolution);
  tile.raster = rasterize(map, tile.window, threads);
  return tile;
}

/// Same tile cut out of a pre-rasterized global map. `global` must have been
/// rasterized on the lattice (origin an integer multiple of the resolution);
/// cells outside it are zero-filled.
inline MapTile crop_tile(const MapRaster& global, const EgoPose& prior, double side) {
  const double res = global.resolution();
  const int cells = tile_cells(side, res);
  const long long g_col0 = std::llround(global.geometry().origin_x / res);
  const long long g_row0 = std::llround(global.geometry().origin_y / res);
  require(std::abs(g_col0 * res - global.geometry().origin_x) < 1e-6 * res &&
              std::abs(g_row0 * res - global.geometry().origin_y) < 1e-6 * res,
          Errc::kInvalidArgument, "global raster is not aligned to its resolution lattice");
  MapTile tile;
  tile.prior = prior;
  tile.window = centered_window(prior.x, prior.y, cells, res);
  tile.raster = MapRaster(Raster<std::uint8_t>(tile.window.geometry(), global.channels()));
  for (int k = 0; k < global.channels(); ++k)
    for (int r = 0; r < cells; ++r) {
      const long long gr = tile.window.first_row + r - g_row0;
      if (gr < 0 || gr >= global.height()) continue;
      for (int c = 0; c < cells; ++c) {
        const long long gc = tile.window.first_col + c - g_col0;
        if (gc < 0 || gc >= global.width()) continue;
        tile.raster.at(k, r, c) = global.at(k, static_cast<int>(gr), static_cast<int>(gc));
      }
    }
  return tile;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json polygon_to_json(const Polygon& poly) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& v : poly) j.push_back({v.x(), v.y()});
  return j;
}

inline Polygon polygon_from_json(const nlohmann::json& j) {
  Polygon poly;
  for (const auto& v : j) {
    require(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number(), Errc::kInvalidSpec,
            "polygon vertices must be [x, y] number pairs");
    poly.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  require(poly.size() >= 3, Errc::kInvalidSpec, "polygons need at least 3 vertices");
  return poly;
}

/// {"categories": [...], "polygons": {category: [[[x, y], ...], ...]}}
inline nlohmann::json map_to_json(const SemanticMap& map) {
  nlohmann::json polys = nlohmann::json::object();
  for (std::size_t k = 0; k < map.size(); ++k) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : map.polygons[k]) list.push_back(polygon_to_json(p));
    polys[map.categories[k]] = std::move(list);
  }
  return {{"categories", map.categories}, {"polygons", std::move(polys)}};
}

inline SemanticMap map_from_json(const nlohmann::json& doc) {
  require(doc.is_object() && doc.contains("categories") && doc["categories"].is_array(), Errc::kInvalidSpec,
          "map document needs a 'categories' array");
  SemanticMap map;
  try {
    map.categories = doc["categories"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    fail(Errc::kInvalidSpec, "map categories must be strings");
  }
  map.polygons.resize(map.categories.size());
  if (doc.contains("polygons")) {
    const auto& polys = doc["polygons"];
    require(polys.is_object(), Errc::kInvalidSpec, "'polygons' must be an object keyed by category");
    for (const auto& [name, list] : polys.items()) {
      const int k = map.category_index(name);
      require(k >= 0, Errc::kInvalidSpec, "polygons reference unknown category '" + name + "'");
      require(list.is_array(), Errc::kInvalidSpec, "polygon list for '" + name + "' must be an array");
      for (const auto& p : list) map.polygons[k].push_back(polygon_from_json(p));
    }
  }
  return map;
}

}  // namespace bevloc
