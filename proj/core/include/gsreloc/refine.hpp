#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsreloc/pnp.hpp"
#include "gsreloc/se3.hpp"

namespace gsreloc {

struct Particle {
  Pose pose;
  double weight = 0.0;
  bool failed = false;
  std::optional<PnPResult> last_result;
  double score_sum = 0.0;  // sum_i S(r_i) * (1 - U(r_i)) over its match set
  AggregateScores aggregates;
};

using ParticleSet = std::vector<Particle>;

// Pose prior: a single estimate or a Top-K retrieval candidate list.
struct PriorSource {
  std::vector<Pose> candidates;

  static PriorSource single_pose(const Pose& pose) { return {{pose}}; }
  static PriorSource candidate_list(std::vector<Pose> poses) {
    return {std::move(poses)};
  }
};

enum class ExtractionMode { kWeightedMean, kBestParticle };

struct RefineConfig {
  int iterations = 2;  // N
  int particles = 8;   // m
  double iter1_trans_range_m = 0.10;
  double iter1_rot_range_deg = 0.01;
  double iter2_trans_range_m = 0.01;
  double iter2_rot_range_deg = 0.01;
  std::vector<int> resolution_schedule = {256, 512};  // long side per iteration
  ExtractionMode extraction = ExtractionMode::kWeightedMean;
  bool use_ssim_final = true;
  bool resample_after_final = false;
  std::uint64_t seed = 0;
};

// m particles perturbed around the prior; candidate lists are assigned
// round-robin before perturbation. Initial weights are uniform.
ParticleSet seed_particles(const PriorSource& prior, const RefineConfig& config, Rng& rng);

// Normalized particle fitness: w_m = score_sum_m / sum_j score_sum_j, failed
// particles contribute zero. Sums to 1 whenever any particle is active.
std::vector<double> importance_weights(const ParticleSet& particles);

// Systematic (low-variance) resampling; offspring counts are m*w rounded to
// adjacent integers, poses inherited, weights reset to 1/m.
ParticleSet resample(const ParticleSet& particles, std::span<const double> weights,
                     Rng& rng);

struct ParticleDiagnostic {
  int iteration = 0;  // 1-based; the SSIM pass reports iteration N with phase "final"
  int particle = 0;
  std::string phase;  // "refine" or "final"
  Pose pose;
  double weight = 0.0;
  double score_sum = 0.0;
  double trans_err_m = 0.0;
  double rot_err_deg = 0.0;
  bool failed = false;
};

struct RefineInputs {
  const GaussianScene* scene = nullptr;
  const PerGaussianTrace* traces = nullptr;
  Pose query_pose_truth;
  CameraIntrinsics base_intrinsics;  // full resolution; scaled per iteration
  MatcherConfig matcher;
  RansacConfig ransac;
  bool use_uncertainty_weights = true;
};

struct RefineOutcome {
  Pose pose;
  int active_particles = 0;
  AggregateScores selected_aggregates;  // from the top-weight particle
  std::vector<ParticleDiagnostic> diagnostics;
};

// Full loop: seed (the iteration-1 perturbation), then per iteration
// local_refine each particle, Eq.-2 weighting, resampling between iterations;
// after the last iteration optional SSIM re-weighting against the query
// image, then weighted-mean or best-particle extraction.
RefineOutcome refine(const RefineInputs& inputs, const PriorSource& prior,
                     const RefineConfig& config, std::uint64_t seed);

}  // namespace gsreloc
