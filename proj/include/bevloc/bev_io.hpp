#pragma once

// Observation and BEV files.
//
// An observation directory holds, per camera <name>:
//   <name>.labels.smr   one u8 channel of render labels (row 0 = top row)
//   <name>.heights.smf  one f32 channel of heights, NaN where nothing was hit
// plus manifest.json with the camera order, label names and the number of
// map categories.
//
// A BEV file holds N score channels followed by one mask channel. The u8
// form stores round(255 * score) and 255 for observed cells; the f32 form
// stores the scores as-is and 1.0 for observed cells.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevloc/bev_projection.hpp"
#include "bevloc/core/error.hpp"
#include "bevloc/raster_io.hpp"
#include "bevloc/rig_io.hpp"
#include "bevloc/synthworld/render.hpp"

namespace bevloc {

namespace detail {

inline GridGeometry image_geometry(int rows, int cols) { return {cols, rows, 1.0, 0.0, 0.0}; }

}  // namespace detail

inline void save_observation(const SurroundObservation& obs, const CameraRig& rig,
                             const std::filesystem::path& dir) {
  require(obs.cameras.size() == rig.size(), Errc::kShapeMismatch, "observation does not match the rig");
  std::filesystem::create_directories(dir);
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto& cam = obs.cameras[i];
    const auto g = detail::image_geometry(cam.labels.rows(), cam.labels.cols());
    Raster<std::uint8_t> labels(g, 1);
    labels.data() = cam.labels.data();
    Raster<float> heights(g, 1);
    heights.data() = cam.heights.data();
    save_raster(labels, dir / (rig.cameras[i].name + ".labels.smr"));
    save_float_raster(heights, dir / (rig.cameras[i].name + ".heights.smf"));
    names.push_back(rig.cameras[i].name);
  }
  const nlohmann::json manifest = {
      {"cameras", names}, {"label_names", obs.label_names}, {"category_count", obs.category_count}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Loads an observation and checks it against `rig` (camera names in rig
/// order, image sizes equal to the intrinsics).
inline SurroundObservation load_observation(const std::filesystem::path& dir, const CameraRig& rig) {
  const nlohmann::json manifest = read_json_file(dir / "manifest.json");
  SurroundObservation obs;
  std::vector<std::string> names;
  try {
    names = manifest.at("cameras").get<std::vector<std::string>>();
    obs.label_names = manifest.at("label_names").get<std::vector<std::string>>();
    obs.category_count = manifest.at("category_count").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kInvalidSpec, std::string("malformed observation manifest: ") + e.what());
  }
  require(names.size() == rig.size(), Errc::kShapeMismatch, "observation and rig differ in camera count");
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const Camera& cam = rig.cameras[i];
    require(names[i] == cam.name, Errc::kShapeMismatch,
            "observation camera '" + names[i] + "' does not match rig camera '" + cam.name + "'");
    const auto labels = load_raster(dir / (cam.name + ".labels.smr"));
    const auto heights = load_float_raster(dir / (cam.name + ".heights.smf"));
    require(labels.channels() == 1 && heights.channels() == 1, Errc::kShapeMismatch,
            "observation planes must have one channel");
    require(labels.width() == cam.intrinsics.width && labels.height() == cam.intrinsics.height &&
                heights.width() == labels.width() && heights.height() == labels.height(),
            Errc::kShapeMismatch, "observation of camera '" + cam.name + "' does not match its intrinsics");
    CameraObservation c;
    c.labels = Image<std::uint8_t>(labels.height(), labels.width(), 1);
    c.labels.data() = labels.data();
    c.heights = Image<float>(heights.height(), heights.width(), 1);
    c.heights.data() = heights.data();
    obs.cameras.push_back(std::move(c));
  }
  return obs;
}

inline Raster<std::uint8_t> bev_to_bytes(const BevGrid& bev) {
  const int n = bev.channels();
  Raster<std::uint8_t> out(bev.scores.geometry(), n + 1);
  for (int k = 0; k < n; ++k) {
    const auto src = bev.scores.plane(k);
    auto dst = out.plane(k);
    for (std::size_t i = 0; i < src.size(); ++i)
      dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0, 1.0) * 255.0));
  }
  auto m = out.plane(n);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = bev.mask[i] ? 255 : 0;
  return out;
}

inline Raster<float> bev_to_floats(const BevGrid& bev) {
  const int n = bev.channels();
  Raster<float> out(bev.scores.geometry(), n + 1);
  for (int k = 0; k < n; ++k) {
    const auto src = bev.scores.plane(k);
    auto dst = out.plane(k);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
  }
  auto m = out.plane(n);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = bev.mask[i] ? 1.0f : 0.0f;
  return out;
}

template <typename T>
BevGrid bev_from_raster(const Raster<T>& r, double full_scale) {
  require(r.channels() >= 2, Errc::kMalformedHeader, "BEV file needs score channels and a mask channel");
  require(r.width() == r.height(), Errc::kShapeMismatch, "BEV grid must be square");
  const int n = r.channels() - 1;
  BevGrid bev;
  bev.scores = Raster<double>(r.geometry(), n, 0.0);
  bev.mask.assign(r.geometry().cell_count(), 0);
  const auto m = r.plane(n);
  for (std::size_t i = 0; i < m.size(); ++i) bev.mask[i] = m[i] > 0 ? 1 : 0;
  for (int k = 0; k < n; ++k) {
    const auto src = r.plane(k);
    auto dst = bev.scores.plane(k);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = bev.mask[i] ? static_cast<double>(src[i]) / full_scale : 0.0;
  }
  return bev;
}

/// Saves as .smr (u8) or .smf (f32) depending on the extension.
inline void save_bev(const BevGrid& bev, const std::filesystem::path& path) {
  if (path.extension() == ".smf") save_float_raster(bev_to_floats(bev), path);
  else save_raster(bev_to_bytes(bev), path);
}

inline BevGrid load_bev(const std::filesystem::path& path) {
  if (path.extension() == ".smf") return bev_from_raster(load_float_raster(path), 1.0);
  return bev_from_raster(load_raster(path), 255.0);
}

/// 8-bit preview of one channel, +y up: 0 unobserved, 40..255 observed score.
inline std::vector<std::uint16_t> bev_preview(const BevGrid& bev, int channel) {
  const int s = bev.size();
  std::vector<std::uint16_t> px(static_cast<std::size_t>(s) * s, 0);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      if (!bev.observed(r, c)) continue;
      const double v = std::clamp(bev.scores.at(channel, r, c), 0.0, 1.0);
      px[static_cast<std::size_t>(s - 1 - r) * s + c] = static_cast<std::uint16_t>(40 + std::lround(215 * v));
    }
  return px;
}

}  // namespace bevloc
