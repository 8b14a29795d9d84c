#include <gtest/gtest.h>

#include "test_util.hpp"

namespace bevloc {
namespace {

Polygon rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

CameraRig rig_of(std::vector<Camera> cams) {
  CameraRig rig;
  rig.cameras = std::move(cams);
  return rig;
}

Image<double> one_hot_heights(int rows, int cols, int bins, int k) {
  Image<double> h(rows, cols, bins, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) h.at(r, c, k) = 1.0;
  return h;
}

Image<double> random_image(Rng& rng, int rows, int cols, int channels) {
  Image<double> img(rows, cols, channels);
  for (auto& v : img.data()) v = rng.uniform();
  return img;
}

TEST(Projection, NadirPrincipalPointLandsOnEgoCell) {
  const Camera cam = testing::nadir_camera();
  Image<double> f(101, 101, 1, 0.0);
  f.at(50, 50) = 1.0;
  BevSpec spec{10.0, 0.5, default_height_bins()};
  const std::vector<Image<double>> feats{f}, hs{one_hot_heights(101, 101, 6, 1)};
  const auto vol = project_to_volume(feats, hs, rig_of({cam}), spec);
  const int o = spec.size() / 2;
  EXPECT_EQ(spec.center(o), 0.0);
  EXPECT_NEAR(vol.feature(o, o, 1, 0), 1.0, 1e-12);
  EXPECT_NEAR(vol.weight(o, o, 1), 1.0, 1e-12);
  for (int r = 0; r < spec.size(); ++r)
    for (int c = 0; c < spec.size(); ++c)
      for (int k = 0; k < 6; ++k) {
        if (r == o && c == o && k == 1) continue;
        ASSERT_EQ(vol.feature(r, c, k, 0), 0.0);
        if (k != 1) {
          ASSERT_EQ(vol.weight(r, c, k), 0.0);
        }
      }
}

TEST(Projection, CellsBehindTheCameraGetNoWeight) {
  const Camera cam = testing::forward_camera(1.5, -15.0);
  Rng rng(1);
  const std::vector<Image<double>> feats{random_image(rng, 224, 544, 2)}, hs{random_image(rng, 224, 544, 6)};
  BevSpec spec{40.0, 0.5, default_height_bins()};
  const auto vol = project_to_volume(feats, hs, rig_of({cam}), spec);
  int forward = 0;
  for (int r = 0; r < spec.size(); ++r)
    for (int c = 0; c < spec.size(); ++c)
      for (int k = 0; k < 6; ++k) {
        if (spec.center(c) <= 0) ASSERT_EQ(vol.weight(r, c, k), 0.0);
        else forward += vol.weight(r, c, k) > 0;
      }
  EXPECT_GT(forward, 0);
}

// Per-cell accumulation written out with explicit matrices.
TEST(Projection, MatchesBruteForceAccumulation) {
  const Camera a = make_camera("a", {60, 60, 40, 20, 81, 41}, Vec3(0.5, 0.2, 1.8), deg2rad(10), deg2rad(-30));
  const Camera b = make_camera("b", {70, 70, 40, 20, 81, 41}, Vec3(0.3, -0.4, 1.6), deg2rad(-25), deg2rad(-25));
  const CameraRig rig = rig_of({a, b});
  Rng rng(3);
  const std::vector<Image<double>> feats{random_image(rng, 41, 81, 3), random_image(rng, 41, 81, 3)};
  const std::vector<Image<double>> hs{random_image(rng, 41, 81, 6), random_image(rng, 41, 81, 6)};
  BevSpec spec{20.0, 0.5, default_height_bins()};
  const auto vol = project_to_volume(feats, hs, rig, spec);

  const int s = spec.size();
  auto bilinear = [](const Image<double>& img, double u, double v, int ch) {
    const int c0 = static_cast<int>(std::floor(u)), r0 = static_cast<int>(std::floor(v));
    const int c1 = std::min(c0 + 1, img.cols() - 1), r1 = std::min(r0 + 1, img.rows() - 1);
    const double fu = u - c0, fv = v - r0;
    return (1 - fu) * (1 - fv) * img.at(r0, c0, ch) + fu * (1 - fv) * img.at(r0, c1, ch) +
           (1 - fu) * fv * img.at(r1, c0, ch) + fu * fv * img.at(r1, c1, ch);
  };
  int overlap = 0;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int k = 0; k < 6; ++k) {
        double w = 0.0;
        std::vector<double> acc(3, 0.0);
        int seen = 0;
        for (int i = 0; i < 2; ++i) {
          const Camera& cam = rig.cameras[i];
          Eigen::Matrix4d th = Eigen::Matrix4d::Identity();
          th(2, 3) = spec.bins[k];
          const Eigen::Vector3d q =
              cam.intrinsics.matrix() * cam.extrinsics.projection() * th * Eigen::Vector4d(spec.center(c), spec.center(r), 0, 1);
          if (q.z() <= 0) continue;
          const double u = q.x() / q.z(), v = q.y() / q.z();
          if (u < 0 || v < 0 || u > 80 || v > 40) continue;
          ++seen;
          const double h = bilinear(hs[i], u, v, k);
          w += h;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += bilinear(feats[i], u, v, ch) * h;
        }
        overlap += seen == 2;
        ASSERT_NEAR(vol.weight(r, c, k), w, 1e-6);
        for (int ch = 0; ch < 3; ++ch) ASSERT_NEAR(vol.feature(r, c, k, ch), acc[ch], 1e-6);
      }
  EXPECT_GT(overlap, 50);
}

TEST(Projection, CameraOrderAndThreadsDoNotMatter) {
  const CameraRig rig = default_rig(68, 28);
  Rng rng(8);
  std::vector<Image<double>> feats, hs;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    feats.push_back(random_image(rng, 28, 68, 3));
    hs.push_back(random_image(rng, 28, 68, 6));
  }
  BevSpec spec{30.0, 0.5, default_height_bins()};
  const auto base = flatten_volume(project_to_volume(feats, hs, rig, spec, 1), spec);
  const auto threaded = flatten_volume(project_to_volume(feats, hs, rig, spec, 3), spec, 3);
  EXPECT_EQ(base.scores.data(), threaded.scores.data());

  CameraRig rev = rig;
  std::reverse(rev.cameras.begin(), rev.cameras.end());
  std::reverse(feats.begin(), feats.end());
  std::reverse(hs.begin(), hs.end());
  const auto reversed = flatten_volume(project_to_volume(feats, hs, rev, spec), spec);
  EXPECT_EQ(base.mask, reversed.mask);
  for (std::size_t i = 0; i < base.scores.data().size(); ++i)
    ASSERT_NEAR(base.scores.data()[i], reversed.scores.data()[i], 1e-9);
}

TEST(Projection, NonzeroCellsAreReachable) {
  const CameraRig rig = default_rig(68, 28);
  Rng rng(2);
  std::vector<Image<double>> feats, hs;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    feats.push_back(random_image(rng, 28, 68, 1));
    hs.push_back(random_image(rng, 28, 68, 6));
  }
  BevSpec spec{60.0, 1.0, default_height_bins()};
  const auto bev = flatten_volume(project_to_volume(feats, hs, rig, spec), spec);
  for (int r = 0; r < bev.size(); ++r)
    for (int c = 0; c < bev.size(); ++c) {
      if (bev.scores.at(0, r, c) == 0.0) continue;
      bool reachable = false;
      for (const auto& cam : rig.cameras)
        for (double b : spec.bins) {
          const auto p = ground_to_pixel(cam, {spec.center(c), spec.center(r)}, {b});
          if (p && p->u >= 0 && p->v >= 0 && p->u <= 67 && p->v <= 27) reachable = true;
        }
      ASSERT_TRUE(reachable);
    }
}

TEST(Flatten, SingleLayerIsNormalized) {
  OccupancyVolume vol(4, 3, 2);
  vol.weight(1, 2, 0) = 2.0;
  vol.feature(1, 2, 0, 0) = 1.0;
  vol.feature(1, 2, 0, 1) = 0.5;
  BevSpec spec{2.0, 0.5, {0.0, 1.0, 2.0}};
  const auto bev = flatten_volume(vol, spec);
  EXPECT_EQ(bev.scores.at(0, 1, 2), 0.5);
  EXPECT_EQ(bev.scores.at(1, 1, 2), 0.25);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(bev.observed(r, c), r == 1 && c == 2);
}

TEST(Flatten, ZeroVolume) {
  OccupancyVolume vol(6, 2, 3);
  const auto bev = flatten_volume(vol, BevSpec{3.0, 0.5, {0.0, 1.0}});
  for (double v : bev.scores.data()) EXPECT_EQ(v, 0.0);
  for (auto m : bev.mask) EXPECT_EQ(m, 0);
}

TEST(Flatten, LinearInFeatures) {
  const CameraRig rig = default_rig(68, 28);
  Rng rng(4);
  std::vector<Image<double>> feats, scaled4, scaled3, hs;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    feats.push_back(random_image(rng, 28, 68, 2));
    hs.push_back(random_image(rng, 28, 68, 6));
    scaled4.push_back(feats.back());
    scaled3.push_back(feats.back());
    for (auto& v : scaled4.back().data()) v *= 4.0;
    for (auto& v : scaled3.back().data()) v *= 3.0;
  }
  BevSpec spec{30.0, 0.5, default_height_bins()};
  const auto a = flatten_volume(project_to_volume(feats, hs, rig, spec), spec);
  const auto b = flatten_volume(project_to_volume(scaled4, hs, rig, spec), spec);
  const auto c = flatten_volume(project_to_volume(scaled3, hs, rig, spec), spec);
  for (std::size_t i = 0; i < a.scores.data().size(); ++i) {
    ASSERT_EQ(b.scores.data()[i], 4.0 * a.scores.data()[i]);  // power of two: exact
    ASSERT_NEAR(c.scores.data()[i], 3.0 * a.scores.data()[i], 1e-12);
  }
}

TEST(OracleBev, RectangleUnderTheEgo) {
  SemanticMap map;
  map.categories = {"drivable"};
  map.polygons = {{rect(97.9, 48.1, 102.1, 51.9)}};
  BevSpec spec{10.0, 0.5, default_height_bins()};
  const auto bev = oracle_bev(map, {100, 50, 0}, spec);
  for (int r = 0; r < spec.size(); ++r)
    for (int c = 0; c < spec.size(); ++c) {
      const bool in = std::abs(spec.center(c)) <= 2.1 && std::abs(spec.center(r)) <= 1.9;
      EXPECT_EQ(bev.scores.at(0, r, c), in ? 1.0 : 0.0);
      EXPECT_TRUE(bev.observed(r, c));
    }
}

TEST(OracleBev, HalfTurnFlipsTheGrid) {
  WorldSpec ws;
  ws.seed = 6;
  const World w = generate_world(ws);
  BevSpec spec;
  const auto a = oracle_bev(w, {12.3, -40.1, 0.2}, spec);
  const auto b = oracle_bev(w, {12.3, -40.1, 0.2 + std::numbers::pi}, spec);
  const int s = spec.size();
  for (int k = 0; k < a.channels(); ++k)
    for (int r = 1; r < s; ++r)
      for (int c = 1; c < s; ++c) ASSERT_EQ(a.scores.at(k, r, c), b.scores.at(k, s - r, s - c));
}

TEST(OracleBev, MatchesRasterizeOfTransformedMap) {
  WorldSpec ws;
  ws.seed = 10;
  const World w = generate_world(ws);
  const EgoPose pose(-30.5, 71.25, 1.1);
  BevSpec spec;
  const auto bev = oracle_bev(w, pose, spec);
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  const SemanticMap local = w.map.transformed([&](const Vec2& p) {
    const double dx = p.x() - pose.x, dy = p.y() - pose.y;
    return Vec2(c * dx + s * dy, -s * dx + c * dy);
  });
  const auto r = rasterize(local, spec.geometry());
  std::size_t differ = 0;
  for (std::size_t i = 0; i < r.data().size(); ++i) differ += r.data()[i] != bev.scores.data()[i];
  // The two transforms round differently; allow cells whose centre lies
  // within rounding distance of an edge.
  EXPECT_LE(differ, 2u);
}

TEST(Pipeline, ProjectedDrivableMatchesOracle) {
  WorldSpec ws;
  ws.seed = 2;
  const World w = generate_world(ws);
  Rng rng(9);
  const EgoPose pose = sample_drivable_pose(w, rng, 250);
  const CameraRig rig = default_rig();
  BevSpec spec;
  const auto obs = render_surround(w, rig, pose);
  const auto bev = project_observation(obs, rig, spec);
  const auto gt = oracle_bev(w, pose, spec);
  const auto e = iou(bev, gt, w.map.category_index(kDrivable));
  ASSERT_TRUE(e.iou);
  EXPECT_GE(*e.iou, 0.9);
}

TEST(Pipeline, PyramidLevelHalvesTheGrid) {
  const CameraRig rig = default_rig(136, 56);
  std::vector<Image<double>> feats, hs;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    feats.emplace_back(56, 136, 1, 1.0);
    hs.push_back(one_hot_heights(56, 136, 6, 1));
  }
  BevSpec spec{40.0, 0.5, default_height_bins()};
  const auto coarse = project_level(feats, hs, rig, spec, 2);
  EXPECT_EQ(coarse.size(), spec.size() / 2);
  EXPECT_EQ(coarse.scores.geometry().resolution, 1.0);
  int observed = 0;
  for (int r = 0; r < coarse.size(); ++r)
    for (int c = 0; c < coarse.size(); ++c)
      if (coarse.observed(r, c)) {
        ++observed;
        ASSERT_NEAR(coarse.scores.at(0, r, c), 1.0, 1e-12);
      }
  EXPECT_GT(observed, 0);
}

TEST(BevIo, RoundTripBothFormats) {
  WorldSpec ws;
  ws.seed = 2;
  const World w = generate_world(ws);
  const CameraRig rig = default_rig(136, 56);
  BevSpec spec{50.0, 0.5, default_height_bins()};
  const auto bev = project_observation(render_surround(w, rig, {0, 0, 0}), rig, spec);
  const auto dir = testing::temp_dir("bev_io");
  save_bev(bev, dir / "a.smf");
  const auto f = load_bev(dir / "a.smf");
  EXPECT_EQ(f.mask, bev.mask);
  EXPECT_EQ(f.scores.geometry(), bev.scores.geometry());
  for (std::size_t i = 0; i < bev.scores.data().size(); ++i)
    ASSERT_EQ(f.scores.data()[i], static_cast<double>(static_cast<float>(bev.scores.data()[i])));
  save_bev(bev, dir / "a.smr");
  const auto u = load_bev(dir / "a.smr");
  EXPECT_EQ(u.mask, bev.mask);
  for (std::size_t i = 0; i < bev.scores.data().size(); ++i)
    ASSERT_NEAR(u.scores.data()[i], bev.scores.data()[i], 0.5 / 255 + 1e-12);
}

TEST(BevIo, ObservationRoundTripAndRigCheck) {
  WorldSpec ws;
  ws.seed = 5;
  const World w = generate_world(ws);
  const CameraRig rig = default_rig(68, 28);
  const auto obs = render_surround(w, rig, {3, 4, 0.5});
  const auto dir = testing::temp_dir("obs_io");
  save_observation(obs, rig, dir);
  const auto back = load_observation(dir, rig);
  EXPECT_EQ(back.label_names, obs.label_names);
  EXPECT_EQ(back.category_count, obs.category_count);
  for (std::size_t i = 0; i < rig.size(); ++i) EXPECT_EQ(back.cameras[i].labels, obs.cameras[i].labels);

  try {
    load_observation(dir, default_rig(136, 56));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kShapeMismatch);
  }
}

}  // namespace
}  // namespace bevloc
