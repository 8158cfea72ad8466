#include "gsreloc/refine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gsreloc/renderer.hpp"

namespace gsreloc {

ParticleSet seed_particles(const PriorSource& prior, const RefineConfig& config, Rng& rng) {
  if (prior.candidates.empty()) throw InvalidConfig("prior has no candidates");
  if (config.particles < 1) throw InvalidConfig("particles must be >= 1");
  ParticleSet particles(config.particles);
  const int k = static_cast<int>(prior.candidates.size());
  for (int i = 0; i < config.particles; ++i) {
    const Pose& base = prior.candidates[i % k];
    particles[i].pose =
        perturb(base, config.iter1_trans_range_m, config.iter1_rot_range_deg, rng);
    particles[i].weight = 1.0 / config.particles;
  }
  return particles;
}

std::vector<double> importance_weights(const ParticleSet& particles) {
  bool any_active = false;
  double total = 0.0;
  for (const Particle& p : particles) {
    if (!p.failed) {
      any_active = true;
      total += p.score_sum;
    }
  }
  if (!any_active) throw AllParticlesFailed();
  std::vector<double> w(particles.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t i = 0; i < particles.size(); ++i)
      if (!particles[i].failed) w[i] = particles[i].score_sum / total;
  } else {
    // No particle produced any score mass; fall back to uniform over active.
    int active = 0;
    for (const Particle& p : particles)
      if (!p.failed) ++active;
    for (std::size_t i = 0; i < particles.size(); ++i)
      if (!particles[i].failed) w[i] = 1.0 / active;
  }
  return w;
}

ParticleSet resample(const ParticleSet& particles, std::span<const double> weights,
                     Rng& rng) {
  if (particles.empty()) throw EmptyParticleSet();
  if (particles.size() != weights.size()) throw DimensionMismatch("weights vs particles");
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) throw ZeroTotalWeight();

  const int m = static_cast<int>(particles.size());
  ParticleSet out;
  out.reserve(m);
  const double u0 = rng.uniform();
  int j = 0;
  double cum = weights[0] / total;
  for (int k = 0; k < m; ++k) {
    const double pos = (u0 + k) / m;
    while (pos >= cum && j < m - 1) {
      ++j;
      cum += weights[j] / total;
    }
    Particle child = particles[j];  // inherit pose and solve bookkeeping
    child.weight = 1.0 / m;
    out.push_back(std::move(child));
  }
  return out;
}

namespace {

struct LevelContext {
  CameraIntrinsics intrinsics;
  ImageBuffer query_depth;
};

}  // namespace

RefineOutcome refine(const RefineInputs& inputs, const PriorSource& prior,
                     const RefineConfig& config, std::uint64_t seed) {
  if (config.iterations < 1) throw InvalidConfig("iterations must be >= 1");
  if (config.resolution_schedule.empty()) throw InvalidConfig("empty resolution schedule");

  RefineOutcome outcome;
  Rng seed_rng = Rng::derive(seed, {1000});
  ParticleSet particles = seed_particles(prior, config, seed_rng);

  // Query-side depth maps per working resolution (matcher oracle input).
  std::map<int, LevelContext> levels;
  const auto level_for = [&](int iteration) -> LevelContext& {
    const int idx = std::min<int>(iteration - 1,
                                  static_cast<int>(config.resolution_schedule.size()) - 1);
    const int res = config.resolution_schedule[idx];
    auto it = levels.find(res);
    if (it == levels.end()) {
      LevelContext ctx;
      ctx.intrinsics = inputs.base_intrinsics.scaled_to_long_side(res);
      ctx.query_depth =
          render_depth_only(*inputs.scene, inputs.query_pose_truth, ctx.intrinsics);
      it = levels.emplace(res, std::move(ctx)).first;
    }
    return it->second;
  };

  std::vector<double> weights;
  for (int iter = 1; iter <= config.iterations; ++iter) {
    LevelContext& level = level_for(iter);
    for (std::size_t slot = 0; slot < particles.size(); ++slot) {
      Particle& p = particles[slot];
      // Seeding already applied the iteration-1 perturbation.
      if (iter >= 2) {
        Rng perturb_rng = Rng::derive(seed, {static_cast<std::uint64_t>(iter), slot, 1});
        p.pose = perturb(p.pose, config.iter2_trans_range_m, config.iter2_rot_range_deg,
                         perturb_rng);
      }
      Rng solve_rng = Rng::derive(seed, {static_cast<std::uint64_t>(iter), slot, 2});
      LocalRefineInputs lri;
      lri.scene = inputs.scene;
      lri.traces = inputs.traces;
      lri.query_pose_truth = inputs.query_pose_truth;
      lri.intrinsics = level.intrinsics;
      lri.matcher = inputs.matcher;
      lri.ransac = inputs.ransac;
      lri.use_uncertainty_weights = inputs.use_uncertainty_weights;
      lri.query_depth = &level.query_depth;
      const LocalRefineResult lr = local_refine(p.pose, lri, solve_rng);
      if (lr.ok) {
        p.pose = lr.pnp.pose;
        p.failed = false;
        p.last_result = lr.pnp;
        p.score_sum = lr.score_sum;
        p.aggregates = lr.aggregates;
      } else {
        p.failed = true;
        p.weight = 0.0;
        p.score_sum = 0.0;
        p.aggregates = lr.aggregates;
      }
    }
    weights = importance_weights(particles);
    for (std::size_t i = 0; i < particles.size(); ++i) particles[i].weight = weights[i];

    for (std::size_t i = 0; i < particles.size(); ++i) {
      const PoseError err = pose_error(particles[i].pose, inputs.query_pose_truth);
      outcome.diagnostics.push_back({iter, static_cast<int>(i), "refine",
                                     particles[i].pose, particles[i].weight,
                                     particles[i].score_sum, err.translation_m,
                                     err.rotation_deg, particles[i].failed});
    }

    const bool do_resample = iter < config.iterations || config.resample_after_final;
    if (do_resample) {
      Rng resample_rng = Rng::derive(seed, {static_cast<std::uint64_t>(iter), 9999});
      particles = resample(particles, weights, resample_rng);
      if (iter == config.iterations) {
        weights = importance_weights(particles);
        for (std::size_t i = 0; i < particles.size(); ++i)
          particles[i].weight = weights[i];
      }
    }
  }

  // Final SSIM weighting: re-render each particle and compare to the query.
  if (config.use_ssim_final) {
    const int final_res = config.resolution_schedule.back();
    const CameraIntrinsics k = inputs.base_intrinsics.scaled_to_long_side(final_res);
    const RenderBuffers query_buffers =
        render_primitives(inputs.scene->gaussians, inputs.query_pose_truth, k, nullptr,
                          RenderChannels{true, false});
    double total = 0.0;
    std::vector<double> ssim_w(particles.size(), 0.0);
    for (std::size_t i = 0; i < particles.size(); ++i) {
      if (particles[i].failed) continue;
      const RenderBuffers view =
          render_primitives(inputs.scene->gaussians, particles[i].pose, k, nullptr,
                            RenderChannels{true, false});
      ssim_w[i] = std::max(ssim(query_buffers.color, view.color), 0.0);
      total += ssim_w[i];
    }
    if (total > 0.0) {
      for (std::size_t i = 0; i < particles.size(); ++i) {
        particles[i].weight = ssim_w[i] / total;
      }
      weights = ssim_w;
      for (double& w : weights) w /= total;
    }
    for (std::size_t i = 0; i < particles.size(); ++i) {
      const PoseError err = pose_error(particles[i].pose, inputs.query_pose_truth);
      outcome.diagnostics.push_back({config.iterations, static_cast<int>(i), "final",
                                     particles[i].pose, particles[i].weight,
                                     particles[i].score_sum, err.translation_m,
                                     err.rotation_deg, particles[i].failed});
    }
  }

  int best = -1;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (particles[i].failed) continue;
    if (best < 0 || particles[i].weight > particles[best].weight)
      best = static_cast<int>(i);
  }
  if (best < 0) throw AllParticlesFailed();

  if (config.extraction == ExtractionMode::kBestParticle) {
    outcome.pose = particles[best].pose;
  } else {
    std::vector<Pose> poses;
    std::vector<double> w;
    for (const Particle& p : particles) {
      poses.push_back(p.pose);
      w.push_back(p.failed ? 0.0 : p.weight);
    }
    outcome.pose = weighted_mean_pose(poses, w);
  }
  outcome.selected_aggregates = particles[best].aggregates;
  for (const Particle& p : particles)
    if (!p.failed) ++outcome.active_particles;
  return outcome;
}

}  // namespace gsreloc
