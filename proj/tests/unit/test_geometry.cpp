#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "test_util.hpp"

namespace bevloc {
namespace {

using testing::forward_camera;
using testing::nadir_camera;

TEST(Geometry, NadirPrincipalPoint) {
  const Camera cam = nadir_camera();
  const auto p = ground_to_pixel(cam, {0, 0});
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->u, 50.0, 1e-12);
  EXPECT_NEAR(p->v, 50.0, 1e-12);
  EXPECT_NEAR(p->depth, 1.5, 1e-12);
}

TEST(Geometry, NadirSimilarTriangles) {
  const Camera cam = nadir_camera();
  const auto p = ground_to_pixel(cam, {0.15, 0});
  ASSERT_TRUE(p);
  const double offset = std::hypot(p->u - 50.0, p->v - 50.0);
  EXPECT_NEAR(offset, 10.0, 1e-9);
  EXPECT_NEAR(p->depth * offset / 100.0, 0.15, 1e-12);
}

TEST(Geometry, NadirInverse) {
  const auto g = pixel_to_ground(nadir_camera(), {50, 50});
  ASSERT_TRUE(g);
  EXPECT_NEAR(g->x(), 0.0, 1e-12);
  EXPECT_NEAR(g->y(), 0.0, 1e-12);
}

TEST(Geometry, ForwardCameraMatchesMatrixProduct) {
  const Camera cam = forward_camera(1.5, -10.0);
  const double h = 0.5;
  Eigen::Matrix4d th = Eigen::Matrix4d::Identity();
  th(2, 3) = h;
  const Eigen::Vector4d ground(10, 1, 0, 1);
  const Eigen::Vector3d q = cam.intrinsics.matrix() * cam.extrinsics.projection() * th * ground;
  const auto p = ground_to_pixel(cam, {10, 1}, {h});
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->u, q.x() / q.z(), 1e-9);
  EXPECT_NEAR(p->v, q.y() / q.z(), 1e-9);
  EXPECT_NEAR(p->depth, q.z(), 1e-12);

  // Pinhole from the mount position: the point is 0.5 m above the ground,
  // 1 m below the camera, 10 m ahead and 1 m to the left.
  const double pitch = deg2rad(-10.0);
  const Eigen::Vector3d d(10, 1, h - 1.5);
  const double z = std::cos(pitch) * d.x() + std::sin(pitch) * d.z();
  const double x = -d.y();
  const double y = std::sin(pitch) * d.x() - std::cos(pitch) * d.z();
  EXPECT_NEAR(p->u, 272 + 500 * x / z, 1e-9);
  EXPECT_NEAR(p->v, 112 + 500 * y / z, 1e-9);
}

TEST(Geometry, HorizonHasNoIntersection) {
  const Camera cam = forward_camera(1.5, 0.0);
  EXPECT_FALSE(pixel_to_ground(cam, {272, 112}));
  EXPECT_FALSE(pixel_to_ground(cam, {272, 50}));  // above the horizon
  EXPECT_TRUE(pixel_to_ground(cam, {272, 200}));
}

TEST(Geometry, BehindCameraIsSignalled) {
  const Camera cam = forward_camera(1.5, -10.0);
  EXPECT_FALSE(ground_to_pixel(cam, {-10, 0}));
  const auto p = ground_to_pixel(cam, {10, 0});
  ASSERT_TRUE(p);
  EXPECT_GT(p->depth, 0);
}

TEST(Geometry, RoundTripRandomConfigurations) {
  Rng rng(11);
  int checked = 0;
  double worst = 0.0;
  while (checked < 2000) {
    const CameraIntrinsics k{rng.uniform(100, 800), rng.uniform(100, 800), rng.uniform(0, 640), rng.uniform(0, 480),
                             640, 480};
    const Camera cam = make_camera("c", k, Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 4)),
                                   rng.angle(), deg2rad(rng.uniform(-80, -2)), deg2rad(rng.uniform(-5, 5)));
    const HeightLift lift{rng.uniform(-0.5, 3.0)};
    const Vec2 g(rng.uniform(-40, 40), rng.uniform(-40, 40));
    const auto p = ground_to_pixel(cam, g, lift);
    if (!p || p->depth <= 0.1) continue;
    const auto back = pixel_to_ground(cam, {p->u, p->v}, lift);
    ASSERT_TRUE(back);
    worst = std::max(worst, (*back - g).norm());
    ++checked;
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Geometry, LiftEqualsLoweredCamera) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double h = rng.uniform(-0.5, 1.0), yaw = rng.angle(), pitch = deg2rad(rng.uniform(-60, -10));
    const Vec3 pos(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.6, 3));
    const CameraIntrinsics k{400, 400, 272, 112, 544, 224};
    const Camera cam = make_camera("a", k, pos, yaw, pitch);
    const Camera lowered = make_camera("b", k, pos - Vec3(0, 0, h), yaw, pitch);
    const Vec2 px(rng.uniform(0, 543), rng.uniform(112, 223));
    const auto a = pixel_to_ground(cam, px, {h});
    const auto b = pixel_to_ground(lowered, px, {0.0});
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_LT((*a - *b).norm(), 1e-9);
    }
  }
}

TEST(Geometry, HomographyIsScaleInvariant) {
  const PlaneProjector proj(forward_camera(1.5, -12.0), {0.5});
  const Mat3& hm = proj.homography();
  for (double s : {0.1, 1.0, 7.5, 1e3}) {
    const Vec3 q = hm * (s * Vec3(12, -2, 1));
    const auto p = proj.project(12, -2);
    ASSERT_TRUE(p);
    EXPECT_NEAR(q.x() / q.z(), p->u, 1e-9);
    EXPECT_NEAR(q.y() / q.z(), p->v, 1e-9);
  }
}

TEST(Geometry, InvertSingular) {
  Mat3 m;
  m << 1, 2, 3, 2, 4, 6, 0, 1, 1;
  EXPECT_FALSE(invert3x3(m));
  const Mat3 id = Mat3::Identity();
  const auto inv = invert3x3(id * 2.0);
  ASSERT_TRUE(inv);
  EXPECT_NEAR((*inv - id * 0.5).norm(), 0.0, 1e-15);
}

TEST(Geometry, PoseLaws) {
  const EgoPose p(3.0, -1.0, 0.7);
  const EgoPose a = compose_pose(EgoPose::identity(), p);
  EXPECT_NEAR(a.x, p.x, 1e-12);
  EXPECT_NEAR(a.y, p.y, 1e-12);
  EXPECT_NEAR(a.yaw, p.yaw, 1e-12);

  const EgoPose e = compose_pose(p, invert_pose(p));
  EXPECT_NEAR(e.x, 0.0, 1e-12);
  EXPECT_NEAR(e.y, 0.0, 1e-12);
  EXPECT_NEAR(e.yaw, 0.0, 1e-12);

  const EgoPose q = compose_pose({1, 0, std::numbers::pi / 2}, {1, 0, 0});
  EXPECT_NEAR(q.x, 1.0, 1e-12);
  EXPECT_NEAR(q.y, 1.0, 1e-12);
  EXPECT_NEAR(q.yaw, std::numbers::pi / 2, 1e-12);

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const EgoPose x(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.angle());
    const EgoPose y(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.angle());
    const EgoPose z(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.angle());
    const EgoPose l = compose_pose(compose_pose(x, y), z), r = compose_pose(x, compose_pose(y, z));
    EXPECT_NEAR(l.x, r.x, 1e-12);
    EXPECT_NEAR(l.y, r.y, 1e-12);
    EXPECT_NEAR(normalize_angle(l.yaw - r.yaw), 0.0, 1e-12);
  }
}

TEST(Geometry, DownsampledIntrinsicsKeepPixelCentres) {
  const Camera cam = forward_camera(1.5, -15.0);
  Camera coarse = cam;
  coarse.intrinsics = cam.intrinsics.downsampled(4);
  const auto a = ground_to_pixel(cam, {8, 1.5});
  const auto b = ground_to_pixel(coarse, {8, 1.5});
  ASSERT_TRUE(a && b);
  EXPECT_NEAR(b->u, (a->u - 1.5) / 4.0, 1e-9);
  EXPECT_NEAR(b->v, (a->v - 1.5) / 4.0, 1e-9);
}

TEST(Geometry, RigJsonRoundTrip) {
  const CameraRig rig = default_rig();
  const CameraRig back = rig_from_json(rig_to_json(rig));
  ASSERT_EQ(back.size(), rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    EXPECT_EQ(back.cameras[i].name, rig.cameras[i].name);
    EXPECT_EQ(back.cameras[i].extrinsics.rotation, rig.cameras[i].extrinsics.rotation);
    EXPECT_EQ(back.cameras[i].extrinsics.translation, rig.cameras[i].extrinsics.translation);
    EXPECT_EQ(back.cameras[i].intrinsics.matrix(), rig.cameras[i].intrinsics.matrix());
  }
}

TEST(Geometry, RigRejectsNonOrthonormalRotation) {
  auto j = rig_to_json(default_rig());
  j["cameras"][0]["R"][0] = 2.0;
  try {
    rig_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidSpec);
  }
}

}  // namespace
}  // namespace bevloc
