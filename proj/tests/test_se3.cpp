#include <doctest.h>

#include <cmath>

#include "gsreloc/se3.hpp"

using namespace gsreloc;

namespace {

CameraIntrinsics unit_camera() {
  CameraIntrinsics k;
  k.fx = 1.0;
  k.fy = 1.0;
  k.cx = 0.0;
  k.cy = 0.0;
  k.width = 1;
  k.height = 1;
  return k;
}

Pose random_pose(Rng& rng) {
  const Eigen::Vector3d axis = rng.uniform_unit_vector();
  const double angle = rng.uniform(0.0, 3.0);
  const Eigen::Quaterniond q(Eigen::AngleAxisd(angle, axis));
  return Pose(q, rng.uniform_in_cube(2.0));
}

}  // namespace

TEST_CASE("project: principal-axis point") {
  const Projection p = project(Pose::identity(), unit_camera(), {0, 0, 1});
  CHECK(p.pixel.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.pixel.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.depth == doctest::Approx(1.0));
}

TEST_CASE("project: off-axis hand evaluation") {
  CameraIntrinsics k;
  k.fx = 100.0;
  k.fy = 100.0;
  k.cx = 50.0;
  k.cy = 50.0;
  k.width = 100;
  k.height = 100;
  const Projection p = project(Pose::identity(), k, {0.1, 0.0, 1.0});
  CHECK(p.pixel.x() == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(p.pixel.y() == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(p.depth == doctest::Approx(1.0));
}

TEST_CASE("project: point behind camera") {
  CHECK_THROWS_AS(project(Pose::identity(), unit_camera(), {0, 0, -1}), NonPositiveDepth);
}

TEST_CASE("lift: principal axis") {
  const Eigen::Vector3d p = lift(Pose::identity(), unit_camera(), {0, 0}, 1.0);
  CHECK((p - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("lift: translated camera") {
  const Pose pose(Eigen::Quaterniond::Identity(), {1, 0, 0});
  const Eigen::Vector3d p = lift(pose, unit_camera(), {0, 0}, 2.0);
  CHECK((p - Eigen::Vector3d(1, 0, 2)).norm() < 1e-12);
}

TEST_CASE("lift: error cases") {
  CHECK_THROWS_AS(lift(Pose::identity(), unit_camera(), {0, 0}, 0.0), NonPositiveDepth);
  CameraIntrinsics k = unit_camera();
  k.width = 10;
  k.height = 10;
  CHECK_THROWS_AS(lift(Pose::identity(), k, {20, 0}, 1.0), PixelOutOfBounds);
}

TEST_CASE("lift-project round trip over random draws") {
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    CameraIntrinsics k;
    k.fx = rng.uniform(50.0, 500.0);
    k.fy = rng.uniform(50.0, 500.0);
    k.width = 640;
    k.height = 480;
    k.cx = rng.uniform(200.0, 440.0);
    k.cy = rng.uniform(140.0, 340.0);
    const Pose pose = random_pose(rng);
    const Eigen::Vector2d px(rng.uniform(0.0, 639.0), rng.uniform(0.0, 479.0));
    const double depth = rng.uniform(0.1, 20.0);
    const Eigen::Vector3d world = lift(pose, k, px, depth);
    const Projection back = project(pose, k, world);
    CHECK((back.pixel - px).norm() < 1e-9);
    CHECK(std::abs(back.depth - depth) < 1e-9);
  }
}

TEST_CASE("pose_error: basic values") {
  const Pose a = Pose::identity();
  CHECK(pose_error(a, a).translation_m == 0.0);
  CHECK(pose_error(a, a).rotation_deg == 0.0);

  const Pose b(Eigen::Quaterniond::Identity(), {0.03, 0.04, 0.0});
  CHECK(pose_error(b, a).translation_m == doctest::Approx(0.05).epsilon(1e-12));

  const Eigen::Quaterniond qz(Eigen::AngleAxisd(10.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ()));
  const Pose c(qz, Eigen::Vector3d::Zero());
  CHECK(pose_error(c, a).rotation_deg == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("pose_error: rotation symmetry, zero iff equal") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const PoseError ab = pose_error(a, b);
    const PoseError ba = pose_error(b, a);
    CHECK(std::abs(ab.rotation_deg - ba.rotation_deg) < 1e-9);
    CHECK(std::abs(ab.translation_m - ba.translation_m) < 1e-12);
    CHECK(ab.rotation_deg >= 0.0);
    CHECK(ab.rotation_deg <= 180.0);
  }
}

TEST_CASE("perturb: zero ranges is the identity map") {
  Rng rng(3);
  const Pose pose = random_pose(rng);
  const Pose out = perturb(pose, 0.0, 0.0, rng);
  CHECK(out.translation == pose.translation);
  CHECK(out.rotation.coeffs() == pose.rotation.coeffs());
}

TEST_CASE("perturb: bounded by the configured ranges") {
  Rng rng(11);
  const Pose pose = random_pose(rng);
  for (int i = 0; i < 1000; ++i) {
    const Pose out = perturb(pose, 0.10, 0.01, rng);
    const PoseError err = pose_error(out, pose);
    CHECK(err.translation_m <= 0.10 * std::sqrt(3.0) + 1e-12);
    CHECK(err.rotation_deg <= 0.01 + 1e-9);
  }
}

TEST_CASE("perturb: translation offsets are centered") {
  Rng rng(13);
  const Pose pose = Pose::identity();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  const int n = 10000;
  for (int i = 0; i < n; ++i) mean += perturb(pose, 0.01, 0.01, rng).translation;
  mean /= n;
  for (int c = 0; c < 3; ++c) CHECK(std::abs(mean(c)) < 0.002);
}

TEST_CASE("weighted_mean_pose: basics") {
  Rng rng(5);
  const Pose a = random_pose(rng);

  SUBCASE("single particle") {
    const double w = 0.7;
    const Pose mean = weighted_mean_pose(std::vector<Pose>{a}, std::vector<double>{w});
    CHECK(pose_error(mean, a).translation_m < 1e-12);
    CHECK(pose_error(mean, a).rotation_deg < 1e-9);
  }
  SUBCASE("two identical poses") {
    const std::vector<Pose> poses{a, a};
    const std::vector<double> w{0.3, 0.7};
    const Pose mean = weighted_mean_pose(poses, w);
    CHECK(pose_error(mean, a).translation_m < 1e-12);
    CHECK(pose_error(mean, a).rotation_deg < 1e-9);
  }
  SUBCASE("symmetric rotations cancel") {
    const Eigen::Quaterniond qp(Eigen::AngleAxisd(10.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ()));
    const Eigen::Quaterniond qm(Eigen::AngleAxisd(-10.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ()));
    const std::vector<Pose> poses{Pose(qp, Eigen::Vector3d::Zero()),
                                  Pose(qm, Eigen::Vector3d::Zero())};
    const std::vector<double> w{0.5, 0.5};
    const Pose mean = weighted_mean_pose(poses, w);
    CHECK(pose_error(mean, Pose::identity()).rotation_deg < 1e-6);
  }
}

TEST_CASE("weighted_mean_pose: invariant to uniform weight rescaling") {
  Rng rng(17);
  std::vector<Pose> poses;
  std::vector<double> w;
  for (int i = 0; i < 6; ++i) {
    poses.push_back(random_pose(rng));
    w.push_back(rng.uniform(0.1, 2.0));
  }
  const Pose m1 = weighted_mean_pose(poses, w);
  std::vector<double> w2 = w;
  for (double& x : w2) x *= 37.5;
  const Pose m2 = weighted_mean_pose(poses, w2);
  CHECK(pose_error(m1, m2).translation_m < 1e-12);
  CHECK(pose_error(m1, m2).rotation_deg < 1e-9);
}

TEST_CASE("weighted_mean_pose: error cases") {
  CHECK_THROWS_AS(weighted_mean_pose(std::vector<Pose>{}, std::vector<double>{}),
                  EmptyParticleSet);
  CHECK_THROWS_AS(
      weighted_mean_pose(std::vector<Pose>{Pose::identity()}, std::vector<double>{0.0}),
      ZeroTotalWeight);
}

TEST_CASE("pose serialization is sign-canonical and bit-stable") {
  Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    const Pose p = random_pose(rng);
    const auto a = p.to_array();
    CHECK(a[0] >= 0.0);
    const Pose q = Pose::from_array(a);
    const auto b = q.to_array();
    for (int j = 0; j < 7; ++j) CHECK(a[j] == b[j]);
  }
}
