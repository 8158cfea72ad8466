#pragma once

#include <array>
#include <cmath>
#include <span>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gsreloc/errors.hpp"
#include "gsreloc/rng.hpp"

namespace gsreloc {

// Rigid transform on SE(3). Convention (repo-wide): a Pose maps CAMERA-frame
// points to WORLD-frame points, i.e. X_world = R * X_cam + t. A camera "pose"
// is therefore its camera-to-world transform.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
      : rotation(q), translation(t) {
    // Renormalize only when clearly off; keeps serialized poses bit-stable
    // across save/load round trips.
    if (std::abs(rotation.squaredNorm() - 1.0) > 1e-12) rotation.normalize();
  }

  static Pose identity() { return Pose(); }

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }

  Eigen::Vector3d apply(const Eigen::Vector3d& p_camera) const {
    return rotation * p_camera + translation;
  }

  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& p_world) const {
    return rotation.conjugate() * (p_world - translation);
  }

  Pose inverse() const {
    const Eigen::Quaterniond qi = rotation.conjugate();
    return Pose(qi, -(qi * translation));
  }

  Pose operator*(const Pose& rhs) const {
    return Pose(rotation * rhs.rotation, rotation * rhs.translation + translation);
  }

  // Serialized order is (qw, qx, qy, qz, tx, ty, tz), sign-canonical (qw >= 0).
  std::array<double, 7> to_array() const {
    Eigen::Quaterniond q = rotation;
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return {q.w(), q.x(), q.y(), q.z(), translation.x(), translation.y(), translation.z()};
  }

  static Pose from_array(const std::array<double, 7>& a) {
    return Pose(Eigen::Quaterniond(a[0], a[1], a[2], a[3]),
                Eigen::Vector3d(a[4], a[5], a[6]));
  }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 &&
           cx < width && cy >= 0.0 && cy < height;
  }

  // Pixel centers sit at integer coordinates; (u, v) is nearest-pixel valid
  // when it rounds into [0, width) x [0, height).
  bool in_bounds(const Eigen::Vector2d& px) const {
    return px.x() >= -0.5 && px.x() < width - 0.5 && px.y() >= -0.5 &&
           px.y() < height - 0.5;
  }

  CameraIntrinsics scaled(double factor) const {
    CameraIntrinsics k = *this;
    k.fx *= factor;
    k.fy *= factor;
    k.cx *= factor;
    k.cy *= factor;
    k.width = static_cast<int>(std::lround(width * factor));
    k.height = static_cast<int>(std::lround(height * factor));
    return k;
  }

  // Scales so the longer image side becomes `long_side`.
  CameraIntrinsics scaled_to_long_side(int long_side) const {
    const int cur = std::max(width, height);
    return scaled(static_cast<double>(long_side) / cur);
  }
};

struct PoseError {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

// Projects a world point into the camera; throws NonPositiveDepth when the
// camera-frame depth is <= 1e-9.
Projection project(const Pose& pose, const CameraIntrinsics& intrinsics,
                   const Eigen::Vector3d& point_world);

// Back-projects a pixel at the given camera-frame depth to a world point
// (Eq. of the 2D->3D lifting through rendered depth).
Eigen::Vector3d lift(const Pose& pose, const CameraIntrinsics& intrinsics,
                     const Eigen::Vector2d& pixel, double depth);

PoseError pose_error(const Pose& estimate, const Pose& ground_truth);

// Uniform cube translation offset plus a rotation about a uniform random axis
// by an angle uniform in [0, rot_range_deg].
Pose perturb(const Pose& pose, double trans_range_m, double rot_range_deg, Rng& rng);

// Weighted chordal mean: translation is the weighted arithmetic mean, rotation
// the principal eigenvector of the weighted quaternion outer-product sum.
Pose weighted_mean_pose(std::span<const Pose> poses, std::span<const double> weights);

// Camera-to-world pose at `position` looking toward `target` (camera z
// forward, y down), with `up` fixing the roll.
Pose make_look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                  const Eigen::Vector3d& up = Eigen::Vector3d(0, 0, 1));

}  // namespace gsreloc
