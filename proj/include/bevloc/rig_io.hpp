#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "bevloc/geometry.hpp"

namespace bevloc {

// Rig document:
//   {"cameras": [{"name": "front", "K": [9 numbers, row-major],
//                 "R": [9 numbers, row-major, ego->camera],
//                 "translation": [x, y, z], "width": 544, "height": 224}, ...]}
// translation is the P column: X_cam = R * X_ego + translation.

inline nlohmann::json rig_to_json(const CameraRig& rig) {
  nlohmann::json cams = nlohmann::json::array();
  for (const auto& cam : rig.cameras) {
    const Mat3 k = cam.intrinsics.matrix();
    const Mat3& r = cam.extrinsics.rotation;
    nlohmann::json jk = nlohmann::json::array(), jr = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        jk.push_back(k(i, j));
        jr.push_back(r(i, j));
      }
    const Vec3& t = cam.extrinsics.translation;
    cams.push_back({{"name", cam.name},
                    {"K", jk},
                    {"R", jr},
                    {"translation", {t.x(), t.y(), t.z()}},
                    {"width", cam.intrinsics.width},
                    {"height", cam.intrinsics.height}});
  }
  return {{"cameras", cams}};
}

inline CameraRig rig_from_json(const nlohmann::json& doc) {
  require(doc.is_object() && doc.contains("cameras") && doc["cameras"].is_array(), Errc::kInvalidSpec,
          "rig document needs a 'cameras' array");
  CameraRig rig;
  try {
    for (const auto& jc : doc["cameras"]) {
      const auto k = jc.at("K").get<std::vector<double>>();
      const auto r = jc.at("R").get<std::vector<double>>();
      const auto t = jc.at("translation").get<std::vector<double>>();
      require(k.size() == 9 && r.size() == 9 && t.size() == 3, Errc::kInvalidSpec,
              "rig camera needs 9-element K and R and a 3-element translation");
      require(k[1] == 0.0 && k[3] == 0.0 && k[6] == 0.0 && k[7] == 0.0 && k[8] == 1.0, Errc::kInvalidSpec,
              "K must be upper triangular with K[2][2] = 1 and zero skew");
      Camera cam;
      cam.name = jc.at("name").get<std::string>();
      cam.intrinsics = {k[0], k[4], k[2], k[5], jc.at("width").get<int>(), jc.at("height").get<int>()};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cam.extrinsics.rotation(i, j) = r[3 * i + j];
      cam.extrinsics.translation = Vec3(t[0], t[1], t[2]);
      rig.cameras.push_back(std::move(cam));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kInvalidSpec, std::string("malformed rig document: ") + e.what());
  }
  rig.validate();
  return rig;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), Errc::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::kInvalidSpec, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::kIo, "cannot write " + path.string());
  out << text;
  require(out.good(), Errc::kIo, "write failed for " + path.string());
}

inline CameraRig load_rig(const std::filesystem::path& path) { return rig_from_json(read_json_file(path)); }

inline void save_rig(const CameraRig& rig, const std::filesystem::path& path) {
  write_text_file(path, rig_to_json(rig).dump(2) + "\n");
}

}  // namespace bevloc
