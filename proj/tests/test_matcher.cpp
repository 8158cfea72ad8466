#include <doctest.h>

#include <cmath>

#include "gsreloc/matcher.hpp"
#include "test_util.hpp"

using namespace gsreloc;
using testutil::test_room_scene;

namespace {

struct ViewPair {
  Pose query;
  Pose render;
  CameraIntrinsics k;
};

ViewPair nearby_views() {
  const GaussianScene& scene = test_room_scene();
  ViewPair vp;
  vp.query = scene.training_views[0].pose;
  vp.k = scene.training_views[0].intrinsics;
  // A render hypothesis slightly off the query.
  Rng rng(5);
  vp.render = perturb(vp.query, 0.08, 2.0, rng);
  return vp;
}

}  // namespace

TEST_CASE("noise-free matches are geometrically exact") {
  const GaussianScene& scene = test_room_scene();
  const ViewPair vp = nearby_views();
  const ImageBuffer depth = render_depth_only(scene, vp.render, vp.k);
  MatcherConfig cfg;
  cfg.inlier_count = 40;
  cfg.outlier_fraction = 0.0;
  cfg.pixel_noise_sigma = 0.0;
  cfg.confidence_noise_sigma = 0.0;
  Rng rng(1);
  const CorrespondenceSet set =
      generate_matches(scene, vp.query, vp.render, vp.k, depth, cfg, rng);
  REQUIRE(static_cast<int>(set.matches.size()) == 40);
  for (const Match& m : set.matches) {
    CHECK(!m.is_outlier_truth);
    // r lifts through its own rendered depth back to a world point whose
    // query projection reproduces q.
    const int rx = static_cast<int>(std::lround(m.r.x()));
    const int ry = static_cast<int>(std::lround(m.r.y()));
    const double z = depth.at(rx, ry);
    REQUIRE(z > 0.0);
    const Eigen::Vector3d x = lift(vp.render, vp.k, m.r, z);
    const Projection q_proj = project(vp.query, vp.k, x);
    CHECK((q_proj.pixel - m.q).norm() < 1e-6);
    CHECK(m.confidence > 0.9);
  }
}

TEST_CASE("outlier counts are exact by construction") {
  const GaussianScene& scene = test_room_scene();
  const ViewPair vp = nearby_views();
  const ImageBuffer depth = render_depth_only(scene, vp.render, vp.k);
  MatcherConfig cfg;
  cfg.inlier_count = 70;
  cfg.outlier_fraction = 0.3;
  cfg.pixel_noise_sigma = 0.5;
  Rng rng(2);
  const CorrespondenceSet set =
      generate_matches(scene, vp.query, vp.render, vp.k, depth, cfg, rng);
  CHECK(set.matches.size() == 100);
  int outliers = 0;
  for (const Match& m : set.matches)
    if (m.is_outlier_truth) ++outliers;
  CHECK(outliers == 30);
}

TEST_CASE("generate_matches is bit-reproducible for a fixed seed") {
  const GaussianScene& scene = test_room_scene();
  const ViewPair vp = nearby_views();
  const ImageBuffer depth = render_depth_only(scene, vp.render, vp.k);
  MatcherConfig cfg;
  cfg.inlier_count = 30;
  cfg.outlier_fraction = 0.2;
  cfg.pixel_noise_sigma = 0.7;
  Rng rng1(77);
  Rng rng2(77);
  const CorrespondenceSet a =
      generate_matches(scene, vp.query, vp.render, vp.k, depth, cfg, rng1);
  const CorrespondenceSet b =
      generate_matches(scene, vp.query, vp.render, vp.k, depth, cfg, rng2);
  CHECK(correspondences_to_json(a) == correspondences_to_json(b));
}

TEST_CASE("matcher fails cleanly when nothing is co-visible") {
  const GaussianScene& scene = test_room_scene();
  const ViewPair vp = nearby_views();
  ImageBuffer empty_depth(vp.k.width, vp.k.height, 1);  // all zeros
  MatcherConfig cfg;
  cfg.inlier_count = 10;
  Rng rng(3);
  CHECK_THROWS_AS(
      generate_matches(scene, vp.query, vp.render, vp.k, empty_depth, cfg, rng),
      NotEnoughVisiblePoints);
}

TEST_CASE("lift_matches basics") {
  const ViewPair vp = nearby_views();
  CorrespondenceSet set;
  set.render_pose = Pose::identity();
  set.intrinsics = vp.k;
  Match m;
  m.q = {10.0, 10.0};
  m.r = {vp.k.cx, vp.k.cy};
  set.matches.push_back(m);

  SUBCASE("zero depth map leaves points absent") {
    ImageBuffer depth(vp.k.width, vp.k.height, 1);
    ImageBuffer unc(vp.k.width, vp.k.height, 1);
    const CorrespondenceSet lifted =
        lift_matches(set, Pose::identity(), vp.k, depth, unc);
    CHECK(!lifted.matches[0].lifted_point.has_value());
  }
  SUBCASE("principal point at depth 1 lifts to (0,0,1)") {
    ImageBuffer depth(vp.k.width, vp.k.height, 1);
    ImageBuffer unc(vp.k.width, vp.k.height, 1);
    for (double& v : depth.data) v = 1.0;
    for (double& v : unc.data) v = 0.7;
    const CorrespondenceSet lifted =
        lift_matches(set, Pose::identity(), vp.k, depth, unc);
    REQUIRE(lifted.matches[0].lifted_point.has_value());
    const Eigen::Vector3d expected(0, 0, 1);
    CHECK((*lifted.matches[0].lifted_point - expected).norm() < 1e-9);
    CHECK(lifted.matches[0].uncertainty == 0.7);
  }
  SUBCASE("dimension mismatch") {
    ImageBuffer depth(vp.k.width + 1, vp.k.height, 1);
    ImageBuffer unc(vp.k.width, vp.k.height, 1);
    CHECK_THROWS_AS(lift_matches(set, Pose::identity(), vp.k, depth, unc),
                    MapDimensionMismatch);
  }
}

TEST_CASE("aggregate_scores sums plainly") {
  CorrespondenceSet set;
  CHECK(aggregate_scores(set).confidence_sum == 0.0);
  CHECK(aggregate_scores(set).uncertainty_sum == 0.0);
  Match a;
  a.confidence = 0.4;
  a.uncertainty = 0.2;
  Match b;
  b.confidence = 0.6;
  b.uncertainty = 0.5;
  set.matches = {a, b};
  const AggregateScores s = aggregate_scores(set);
  CHECK(s.confidence_sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.uncertainty_sum == doctest::Approx(0.7).epsilon(1e-12));
  CorrespondenceSet doubled = set;
  doubled.matches.insert(doubled.matches.end(), set.matches.begin(), set.matches.end());
  CHECK(aggregate_scores(doubled).confidence_sum == doctest::Approx(2.0 * s.confidence_sum));
  CHECK(aggregate_scores(doubled).uncertainty_sum ==
        doctest::Approx(2.0 * s.uncertainty_sum));
}

TEST_CASE("inlier confidence exceeds outlier confidence on average") {
  const GaussianScene& scene = test_room_scene();
  const ViewPair vp = nearby_views();
  const ImageBuffer depth = render_depth_only(scene, vp.render, vp.k);
  MatcherConfig cfg;
  cfg.inlier_count = 42;
  cfg.outlier_fraction = 0.3;
  cfg.pixel_noise_sigma = 0.5;
  double in_sum = 0.0;
  double out_sum = 0.0;
  int in_n = 0;
  int out_n = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = Rng::derive(900, {seed});
    const CorrespondenceSet set =
        generate_matches(scene, vp.query, vp.render, vp.k, depth, cfg, rng);
    for (const Match& m : set.matches) {
      if (m.is_outlier_truth) {
        out_sum += m.confidence;
        ++out_n;
      } else {
        in_sum += m.confidence;
        ++in_n;
      }
    }
  }
  REQUIRE(in_n > 0);
  REQUIRE(out_n > 0);
  CHECK(in_sum / in_n > out_sum / out_n);
}

TEST_CASE("correspondence JSON fixtures round-trip with truth labels") {
  const GaussianScene& scene = test_room_scene();
  const ViewPair vp = nearby_views();
  const ImageBuffer depth = render_depth_only(scene, vp.render, vp.k);
  MatcherConfig cfg;
  cfg.inlier_count = 20;
  cfg.outlier_fraction = 0.25;
  cfg.pixel_noise_sigma = 0.4;
  Rng rng(55);
  CorrespondenceSet set =
      generate_matches(scene, vp.query, vp.render, vp.k, depth, cfg, rng);
  const RenderBuffers buffers = render_primitives(scene.gaussians, vp.render, vp.k);
  set = lift_matches(std::move(set), vp.render, vp.k, buffers.depth, buffers.uncertainty);
  const std::string text = correspondences_to_json(set);
  const CorrespondenceSet back = correspondences_from_json(text);
  CHECK(correspondences_to_json(back) == text);
  REQUIRE(back.matches.size() == set.matches.size());
  for (std::size_t i = 0; i < set.matches.size(); ++i)
    CHECK(back.matches[i].is_outlier_truth == set.matches[i].is_outlier_truth);
}
