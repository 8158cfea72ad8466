#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gsreloc/fisher.hpp"
#include "gsreloc/matcher.hpp"
#include "gsreloc/rng.hpp"
#include "gsreloc/se3.hpp"

namespace gsreloc {

// EPnP: 4 control points (3 in the planar fallback), barycentric coordinates,
// M-matrix null space, beta-combination candidates refined by Gauss-Newton,
// Procrustes alignment. Returns the camera-to-world pose minimizing
// reprojection RMS among candidates, cheirality enforced.
Pose epnp(std::span<const Eigen::Vector3d> points_world,
          std::span<const Eigen::Vector2d> pixels, const CameraIntrinsics& intrinsics);

// Eq.-style correspondence sampling weights: uncertainties are clipped to the
// [p_lo, p_hi] percentiles, min-max normalized to [0,1] (constant input maps
// to 0), then s_i = exp(-beta * u_norm_i) + epsilon.
struct SamplingWeights {
  std::vector<double> s;
  double beta = 5.0;
  double epsilon = 0.01;
  double clip_lo = 5.0;   // percentile
  double clip_hi = 95.0;  // percentile
};

// Percentile clip + min-max normalization shared by the PnP weights and the
// particle importance weights.
std::vector<double> normalize_uncertainties(std::span<const double> uncertainties,
                                            double clip_lo = 5.0, double clip_hi = 95.0);

SamplingWeights compute_sampling_weights(std::span<const double> uncertainties,
                                         double beta = 5.0, double epsilon = 0.01,
                                         double clip_lo = 5.0, double clip_hi = 95.0);

struct RansacConfig {
  double reproj_threshold_px = 1.0;  // indoor profile; 2.5 outdoor
  int max_iterations = 1000;
  double confidence = 0.99;
  int min_sample = 6;  // EPnP minimal is 4; configurable 4..6
  double beta = 5.0;
  double epsilon = 0.01;
  std::uint64_t seed = 0;

  static RansacConfig indoor_profile() { return {}; }
  static RansacConfig outdoor_profile() {
    RansacConfig c;
    c.reproj_threshold_px = 2.5;
    return c;
  }
};

struct PnPResult {
  Pose pose;
  std::vector<bool> inlier_mask;   // aligned with the input correspondences
  double weighted_consensus = 0.0; // sum of s_i over inliers
  int iterations_used = 0;
};

// What the solver is allowed to see: pixel, lifted point, nothing else.
struct SolverPoint {
  Eigen::Vector2d pixel;                        // query pixel q_i
  std::optional<Eigen::Vector3d> point_world;   // lifted 3D point
};

std::vector<SolverPoint> to_solver_points(const CorrespondenceSet& set);

// Weighted RANSAC over EPnP minimal samples: indices drawn proportionally to
// s (uniform when weights are absent), hypotheses scored by the weighted
// consensus over query-side reprojection inliers, adaptive early stop, final
// re-fit on the best hypothesis's inliers.
PnPResult ransac_pnp(std::span<const SolverPoint> correspondences,
                     const CameraIntrinsics& intrinsics,
                     const SamplingWeights* weights, const RansacConfig& config,
                     Rng& rng);

// One render -> match -> lift -> solve step for a single pose hypothesis.
struct LocalRefineInputs {
  const GaussianScene* scene = nullptr;
  const PerGaussianTrace* traces = nullptr;  // drives the uncertainty map
  Pose query_pose_truth;                     // matcher oracle input
  CameraIntrinsics intrinsics;               // working resolution
  MatcherConfig matcher;
  RansacConfig ransac;
  bool use_uncertainty_weights = true;
  const ImageBuffer* query_depth = nullptr;  // optional cache at this resolution
};

struct LocalRefineResult {
  bool ok = false;
  PnPResult pnp;
  CorrespondenceSet matches;  // lifted, with uncertainties attached
  double score_sum = 0.0;     // sum_i S_i * (1 - u_norm_i)
  AggregateScores aggregates;
};

LocalRefineResult local_refine(const Pose& pose_init, const LocalRefineInputs& inputs,
                               Rng& rng);

// Eq.-style per-particle fitness numerator over a lifted match set.
double match_score_sum(const CorrespondenceSet& set);

}  // namespace gsreloc
