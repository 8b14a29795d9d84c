#pragma once

// Pinhole cameras, planar ego poses and the height-parameterized inverse
// projective mapping between image pixels and horizontal planes.
//
// Frames: the ego frame has +x forward, +y left, +z up, origin at the centre
// of the rear axle. Camera frames have +x right, +y down, +z along the
// optical axis. Pixel coordinates are continuous with integer values at
// pixel centres.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "bevloc/core/error.hpp"

namespace bevloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kSingularDeterminant = 1e-12;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle to (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Closed-form 3x3 inverse through the adjugate. Returns nullopt when
/// |det| <= threshold.
inline std::optional<Mat3> invert3x3(const Mat3& m, double det_threshold = kSingularDeterminant) {
  Mat3 adj;
  adj(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  adj(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  adj(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  adj(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  adj(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  adj(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  adj(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  adj(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  adj(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double det = m(0, 0) * adj(0, 0) + m(0, 1) * adj(1, 0) + m(0, 2) * adj(2, 0);
  if (!(std::abs(det) > det_threshold)) return std::nullopt;
  return adj / det;
}

// ---------------------------------------------------------------------------
// Cameras
// ---------------------------------------------------------------------------

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  void validate() const {
    require(fx > 0 && fy > 0 && std::isfinite(fx) && std::isfinite(fy), Errc::kInvalidSpec,
            "focal lengths must be positive");
    require(width > 0 && height > 0, Errc::kInvalidSpec, "image size must be positive");
    require(cx >= 0 && cy >= 0 && cx <= width && cy <= height, Errc::kInvalidSpec,
            "principal point must lie inside the image");
  }

  /// Intrinsics of the same camera after box-downsampling the image by an
  /// integer stride (pixel centres stay at integer coordinates).
  CameraIntrinsics downsampled(int stride) const {
    require(stride >= 1, Errc::kInvalidArgument, "stride must be >= 1");
    const double s = stride;
    const double shift = (s - 1.0) / 2.0;
    return {fx / s, fy / s, (cx - shift) / s, (cy - shift) / s, width / stride, height / stride};
  }
};

/// Rigid ego -> camera transform: X_cam = rotation * X_ego + translation.
struct CameraExtrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Mat34 projection() const {
    Mat34 p;
    p.leftCols<3>() = rotation;
    p.col(3) = translation;
    return p;
  }

  /// Camera centre in the ego frame.
  Vec3 center() const { return -rotation.transpose() * translation; }

  void validate() const {
    const double err = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    require(err <= 1e-9, Errc::kInvalidSpec, "camera rotation is not orthonormal");
    require(rotation.determinant() > 0, Errc::kInvalidSpec, "camera rotation must be proper");
    require(translation.allFinite(), Errc::kInvalidSpec, "camera translation must be finite");
  }
};

struct Camera {
  std::string name;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;

  void validate() const {
    intrinsics.validate();
    extrinsics.validate();
  }
};

struct CameraRig {
  std::vector<Camera> cameras;

  std::size_t size() const { return cameras.size(); }
  void validate() const {
    require(!cameras.empty(), Errc::kInvalidSpec, "camera rig is empty");
    for (const auto& c : cameras) c.validate();
  }
};

/// Builds a camera mounted at `position` (ego frame) looking along heading
/// `yaw` (counter-clockwise from +x), tilted by `pitch` (positive looks up)
/// and rolled by `roll` about the optical axis. Angles in radians.
inline Camera make_camera(std::string name, const CameraIntrinsics& intrinsics, const Vec3& position,
                          double yaw, double pitch, double roll = 0.0) {
  const Vec3 forward(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
  Vec3 right(std::sin(yaw), -std::cos(yaw), 0.0);
  Vec3 down = forward.cross(right);
  if (roll != 0.0) {
    const Vec3 r = std::cos(roll) * right + std::sin(roll) * down;
    const Vec3 d = -std::sin(roll) * right + std::cos(roll) * down;
    right = r;
    down = d;
  }
  Camera cam;
  cam.name = std::move(name);
  cam.intrinsics = intrinsics;
  cam.extrinsics.rotation.row(0) = right.transpose();
  cam.extrinsics.rotation.row(1) = down.transpose();
  cam.extrinsics.rotation.row(2) = forward.transpose();
  cam.extrinsics.translation = -cam.extrinsics.rotation * position;
  return cam;
}

/// Six cameras at 60 degree spacing, 544x224 px each, mounted 2 m above the
/// ground and pitched 19 degrees down. The horizon stays above the top image
/// row, so nothing above the mount height is ever in view and the usable
/// ground range is about 28 m.
inline CameraRig default_rig(int width = 544, int height = 224) {
  const double f = 420.0 * width / 544.0;
  const CameraIntrinsics k{f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  static constexpr std::array<const char*, 6> kNames = {"front", "front_left", "back_left",
                                                        "back",  "back_right", "front_right"};
  CameraRig rig;
  for (int i = 0; i < 6; ++i) {
    const double yaw = normalize_angle(deg2rad(60.0 * i));
    const Vec3 pos(1.3 + 1.0 * std::cos(yaw), 0.9 * std::sin(yaw), 2.0);
    rig.cameras.push_back(make_camera(kNames[i], k, pos, yaw, deg2rad(-19.0)));
  }
  return rig;
}

// ---------------------------------------------------------------------------
// Inverse projective mapping
// ---------------------------------------------------------------------------

/// Elevation of the reference plane above the ground, T_h in matrix form.
struct HeightLift {
  double h = 0.0;

  Mat4 matrix() const {
    Mat4 t = Mat4::Identity();
    t(2, 3) = h;
    return t;
  }
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  ///< projective depth lambda, positive in front of the camera
};

/// Plane-to-image homography for one camera and one lift: the K * P * T_h
/// matrix with its third column dropped, plus its inverse. Build once per
/// (camera, height) and reuse inside per-cell loops.
class PlaneProjector {
 public:
  PlaneProjector(const Camera& cam, HeightLift lift) {
    const Mat34 kpt = cam.intrinsics.matrix() * cam.extrinsics.projection() * lift.matrix();
    homography_.col(0) = kpt.col(0);
    homography_.col(1) = kpt.col(1);
    homography_.col(2) = kpt.col(3);
    inverse_ = invert3x3(homography_);
  }

  const Mat3& homography() const { return homography_; }
  bool invertible() const { return inverse_.has_value(); }

  /// Pixel of ground point (x, y) at the lifted plane; nullopt when the
  /// point is on or behind the camera plane.
  std::optional<Projection> project(double x, double y) const {
    const double w0 = homography_(0, 0) * x + homography_(0, 1) * y + homography_(0, 2);
    const double w1 = homography_(1, 0) * x + homography_(1, 1) * y + homography_(1, 2);
    const double w2 = homography_(2, 0) * x + homography_(2, 1) * y + homography_(2, 2);
    if (!(w2 > 0.0)) return std::nullopt;
    return Projection{w0 / w2, w1 / w2, w2};
  }

  /// Intersection of the pixel ray with the lifted plane; nullopt when the
  /// reduced matrix is singular, the ray is parallel to the plane or the
  /// intersection lies behind the camera.
  std::optional<Vec2> unproject(double u, double v) const {
    if (!inverse_) return std::nullopt;
    const Mat3& a = *inverse_;
    const double w0 = a(0, 0) * u + a(0, 1) * v + a(0, 2);
    const double w1 = a(1, 0) * u + a(1, 1) * v + a(1, 2);
    const double w2 = a(2, 0) * u + a(2, 1) * v + a(2, 2);
    const double scale = std::max({std::abs(w0), std::abs(w1), std::abs(w2)});
    if (!(w2 > 1e-12 * scale)) return std::nullopt;
    return Vec2(w0 / w2, w1 / w2);
  }

 private:
  Mat3 homography_;
  std::optional<Mat3> inverse_;
};

/// lambda [u v 1]^T = K P T_h [x y 0 1]^T. Returns nullopt for points with
/// lambda <= 0 (behind the camera).
inline std::optional<Projection> ground_to_pixel(const Camera& cam, const Vec2& ground, HeightLift lift = {}) {
  return PlaneProjector(cam, lift).project(ground.x(), ground.y());
}

/// Inverse of ground_to_pixel at the same lift. Returns nullopt when the ray
/// does not meet the plane in front of the camera.
inline std::optional<Vec2> pixel_to_ground(const Camera& cam, const Vec2& pixel, HeightLift lift = {}) {
  return PlaneProjector(cam, lift).unproject(pixel.x(), pixel.y());
}

/// Unit ray direction of a pixel, expressed in the ego frame.
inline Vec3 pixel_ray(const Camera& cam, double u, double v) {
  const auto& k = cam.intrinsics;
  const Vec3 d_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  return (cam.extrinsics.rotation.transpose() * d_cam).normalized();
}

// ---------------------------------------------------------------------------
// Planar poses
// ---------------------------------------------------------------------------

/// Planar pose (x, y, yaw) of the ego frame in the map frame.
struct EgoPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  EgoPose() = default;
  EgoPose(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}

  static EgoPose identity() { return {}; }

  /// Maps a point from the ego frame into the map frame.
  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {x + c * p.x() - s * p.y(), y + s * p.x() + c * p.y()};
  }

  Vec2 position() const { return {x, y}; }
};

inline EgoPose compose_pose(const EgoPose& a, const EgoPose& b) {
  const Vec2 t = a.apply(b.position());
  return {t.x(), t.y(), a.yaw + b.yaw};
}

inline EgoPose invert_pose(const EgoPose& a) {
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  return {-(c * a.x + s * a.y), s * a.x - c * a.y, -a.yaw};
}

}  // namespace bevloc
