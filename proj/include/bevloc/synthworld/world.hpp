#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevloc/core/error.hpp"
#include "bevloc/geometry.hpp"
#include "bevloc/semantic_map.hpp"

namespace bevloc {

struct Building {
  Polygon footprint;
  double height = 0.0;
};

/// A semantic map extruded into 3D. Category surfaces sit at their category
/// height (raised surfaces get vertical side walls down to the ground,
/// sunken ones walls up to it); buildings are prisms on the ground; bare
/// ground at z = 0 renders as terrain when `ground_plane` is set.
struct World {
  SemanticMap map;
  std::vector<double> surface_heights;  ///< per category, metres above ground
  std::vector<Building> buildings;
  Bounds extent;
  bool ground_plane = true;

  /// Render label table: map categories, then these two.
  int building_label() const { return static_cast<int>(map.size()); }
  int terrain_label() const { return static_cast<int>(map.size()) + 1; }

  std::vector<std::string> label_names() const {
    auto names = map.categories;
    names.emplace_back("building");
    names.emplace_back("terrain");
    return names;
  }

  void validate() const {
    require(surface_heights.size() == map.size(), Errc::kInvalidSpec, "one surface height per category required");
    for (double h : surface_heights)
      require(std::isfinite(h), Errc::kInvalidSpec, "surface heights must be finite");
    for (const auto& b : buildings) {
      require(b.footprint.size() >= 3 && std::isfinite(b.height) && b.height > 0, Errc::kInvalidSpec,
              "buildings need a footprint polygon and positive height");
    }
    require(map.size() + 2 < 255, Errc::kInvalidSpec, "too many categories for 8-bit labels");
  }
};

/// Label value for pixels whose ray hits nothing.
inline constexpr std::uint8_t kNoLabel = 255;

inline nlohmann::json world_to_json(const World& w) {
  nlohmann::json doc = map_to_json(w.map);
  nlohmann::json heights = nlohmann::json::object();
  for (std::size_t k = 0; k < w.map.size(); ++k) heights[w.map.categories[k]] = w.surface_heights[k];
  doc["surface_heights"] = std::move(heights);
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : w.buildings) bs.push_back({{"footprint", polygon_to_json(b.footprint)}, {"height", b.height}});
  doc["buildings"] = std::move(bs);
  doc["extent"] = {w.extent.min_x, w.extent.min_y, w.extent.max_x, w.extent.max_y};
  doc["ground_plane"] = w.ground_plane;
  return doc;
}

inline World world_from_json(const nlohmann::json& doc) {
  World w;
  w.map = map_from_json(doc);
  w.surface_heights.assign(w.map.size(), 0.0);
  try {
    if (doc.contains("surface_heights")) {
      for (const auto& [name, h] : doc["surface_heights"].items()) {
        const int k = w.map.category_index(name);
        require(k >= 0, Errc::kInvalidSpec, "surface height for unknown category '" + name + "'");
        w.surface_heights[k] = h.get<double>();
      }
    }
    if (doc.contains("buildings")) {
      for (const auto& jb : doc["buildings"])
        w.buildings.push_back({polygon_from_json(jb.at("footprint")), jb.at("height").get<double>()});
    }
    if (doc.contains("extent")) {
      const auto e = doc["extent"].get<std::vector<double>>();
      require(e.size() == 4, Errc::kInvalidSpec, "extent must be [min_x, min_y, max_x, max_y]");
      w.extent = {e[0], e[1], e[2], e[3]};
    } else {
      Bounds b{1e300, 1e300, -1e300, -1e300};
      for (const auto& cat : w.map.polygons)
        for (const auto& p : cat) {
          const Bounds pb = polygon_bounds(p);
          b = {std::min(b.min_x, pb.min_x), std::min(b.min_y, pb.min_y), std::max(b.max_x, pb.max_x),
               std::max(b.max_y, pb.max_y)};
        }
      w.extent = b.empty() ? Bounds{} : b;
    }
    if (doc.contains("ground_plane")) w.ground_plane = doc["ground_plane"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kInvalidSpec, std::string("malformed world document: ") + e.what());
  }
  w.validate();
  return w;
}

/// Copy of the world with all geometry mapped through `pose` (map <- world).
inline World transform_world(const World& w, const EgoPose& pose) {
  World out = w;
  out.map = w.map.transformed([&](const Vec2& v) { return pose.apply(v); });
  for (auto& b : out.buildings)
    for (auto& v : b.footprint) v = pose.apply(v);
  Bounds e{1e300, 1e300, -1e300, -1e300};
  for (const Vec2& c : {Vec2(w.extent.min_x, w.extent.min_y), Vec2(w.extent.max_x, w.extent.min_y),
                       Vec2(w.extent.min_x, w.extent.max_y), Vec2(w.extent.max_x, w.extent.max_y)}) {
    const Vec2 p = pose.apply(c);
    e = {std::min(e.min_x, p.x()), std::min(e.min_y, p.y()), std::max(e.max_x, p.x()), std::max(e.max_y, p.y())};
  }
  out.extent = e;
  return out;
}

}  // namespace bevloc
