#include "gsreloc/se3.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace gsreloc {

namespace {
constexpr double kDepthEps = 1e-9;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

Projection project(const Pose& pose, const CameraIntrinsics& intrinsics,
                   const Eigen::Vector3d& point_world) {
  const Eigen::Vector3d pc = pose.apply_inverse(point_world);
  if (pc.z() <= kDepthEps) throw NonPositiveDepth();
  const double u = intrinsics.fx * pc.x() / pc.z() + intrinsics.cx;
  const double v = intrinsics.fy * pc.y() / pc.z() + intrinsics.cy;
  return {Eigen::Vector2d(u, v), pc.z()};
}

Eigen::Vector3d lift(const Pose& pose, const CameraIntrinsics& intrinsics,
                     const Eigen::Vector2d& pixel, double depth) {
  if (depth <= kDepthEps) throw NonPositiveDepth();
  if (!intrinsics.in_bounds(pixel)) throw PixelOutOfBounds();
  const Eigen::Vector3d ray((pixel.x() - intrinsics.cx) / intrinsics.fx,
                            (pixel.y() - intrinsics.cy) / intrinsics.fy, 1.0);
  return pose.apply(depth * ray);
}

PoseError pose_error(const Pose& estimate, const Pose& ground_truth) {
  PoseError e;
  e.translation_m = (estimate.translation - ground_truth.translation).norm();
  const Eigen::Quaterniond q_rel = estimate.rotation * ground_truth.rotation.conjugate();
  const double angle_rad = 2.0 * std::atan2(q_rel.vec().norm(), std::abs(q_rel.w()));
  e.rotation_deg = angle_rad * 180.0 / kPi;
  return e;
}

Pose perturb(const Pose& pose, double trans_range_m, double rot_range_deg, Rng& rng) {
  const Eigen::Vector3d dt = rng.uniform_in_cube(trans_range_m);
  const Eigen::Vector3d axis = rng.uniform_unit_vector();
  const double angle_rad = rng.uniform(0.0, rot_range_deg) * kPi / 180.0;
  const double half = 0.5 * angle_rad;
  const double s = std::sin(half);
  const Eigen::Quaterniond dq(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
  Pose out;
  // Direct assignment keeps perturb(pose, 0, 0) bit-identical to the input.
  out.rotation = dq * pose.rotation;
  out.translation = pose.translation + dt;
  return out;
}

Pose weighted_mean_pose(std::span<const Pose> poses, std::span<const double> weights) {
  if (poses.empty()) throw EmptyParticleSet();
  if (poses.size() != weights.size()) throw DimensionMismatch("poses vs weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ZeroTotalWeight("negative weight");
    total += w;
  }
  if (total <= 0.0) throw ZeroTotalWeight();

  Eigen::Vector3d t_mean = Eigen::Vector3d::Zero();
  Eigen::Matrix4d outer = Eigen::Matrix4d::Zero();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const double w = weights[i] / total;
    t_mean += w * poses[i].translation;
    // qq^T is sign-invariant, so no hemisphere alignment is needed.
    Eigen::Vector4d q(poses[i].rotation.w(), poses[i].rotation.x(),
                      poses[i].rotation.y(), poses[i].rotation.z());
    outer += w * q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(outer);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);  // largest eigenvalue
  return Pose(Eigen::Quaterniond(q(0), q(1), q(2), q(3)), t_mean);
}

Pose make_look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                  const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-12) {
    // Looking along `up`; pick any perpendicular axis.
    right = forward.cross(Eigen::Vector3d(1, 0, 0));
    if (right.norm() < 1e-12) right = forward.cross(Eigen::Vector3d(0, 1, 0));
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(Eigen::Quaterniond(r), position);
}

}  // namespace gsreloc
