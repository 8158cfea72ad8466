#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gsreloc/image.hpp"
#include "gsreloc/renderer.hpp"
#include "gsreloc/rng.hpp"
#include "gsreloc/scene.hpp"
#include "gsreloc/se3.hpp"

namespace gsreloc {

struct Match {
  Eigen::Vector2d q = Eigen::Vector2d::Zero();  // query pixel
  Eigen::Vector2d r = Eigen::Vector2d::Zero();  // rendered-view pixel
  double confidence = 0.0;                      // [0, 1]
  double uncertainty = 0.0;                     // from the rendered U map at r
  std::optional<Eigen::Vector3d> lifted_point;  // world, meters
  bool is_outlier_truth = false;                // ground-truth label, test-only
};

struct CorrespondenceSet {
  std::vector<Match> matches;
  Pose query_pose_truth;  // test-only; solvers never read it
  Pose render_pose;
  CameraIntrinsics intrinsics;
};

struct MatcherConfig {
  int inlier_count = 100;
  double outlier_fraction = 0.0;     // [0, 1)
  double pixel_noise_sigma = 0.0;    // pixels
  double confidence_tau_px = 2.0;    // confidence = clamp(exp(-err/tau) + noise)
  double confidence_noise_sigma = 0.05;
  double covisibility_depth_tol = 0.1;  // meters, occlusion test
  // Viewpoint-dependent degradation (all default off): pixel noise scales and
  // a systematic render-side pixel drift grows as the render pose departs
  // from the query pose, emulating matcher decay away from the true view.
  double noise_gain_per_m = 0.0;
  double noise_gain_per_deg = 0.0;
  double bias_px_per_m = 0.0;
  double bias_px_per_deg = 0.0;
  std::uint64_t seed = 0;
};

// Samples world points co-visible in both views from the rendered depth map,
// forms noisy pixel pairs, corrupts the configured fraction by resampling the
// rendered-view pixel uniformly, and scores confidence from the true
// reprojection error of each match. `query_depth_map` may be supplied to
// avoid re-rendering the query view; when absent it is rendered internally.
CorrespondenceSet generate_matches(const GaussianScene& scene, const Pose& query_pose_truth,
                                   const Pose& render_pose, const CameraIntrinsics& intrinsics,
                                   const ImageBuffer& depth_map, const MatcherConfig& config,
                                   Rng& rng, const ImageBuffer* query_depth_map = nullptr);

// Lifts each match through nearest-pixel rendered depth and attaches the
// rendered uncertainty at its pixel; matches over empty depth get no point.
CorrespondenceSet lift_matches(CorrespondenceSet set, const Pose& render_pose,
                               const CameraIntrinsics& intrinsics,
                               const ImageBuffer& depth_map,
                               const ImageBuffer& uncertainty_map);

struct AggregateScores {
  double confidence_sum = 0.0;
  double uncertainty_sum = 0.0;
};

AggregateScores aggregate_scores(const CorrespondenceSet& set);

// JSON fixture round-trip; ground-truth labels live under a "truth" object.
std::string correspondences_to_json(const CorrespondenceSet& set);
CorrespondenceSet correspondences_from_json(const std::string& text);

}  // namespace gsreloc
