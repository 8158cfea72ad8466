#pragma once

#include "gsreloc/fisher.hpp"
#include "gsreloc/renderer.hpp"
#include "gsreloc/scene.hpp"

namespace gsreloc::testutil {

// Small frontal scene: anchors spread in a slab in front of the identity
// camera, random decoder with moderate weights (no alpha clamping, no
// transmittance cutoff at probe pixels).
inline GaussianScene tiny_frontal_scene(int anchor_count, int feature_dim,
                                        int offsets_per_anchor, std::uint64_t seed) {
  Rng rng(seed);
  GaussianScene scene;
  LinearDecoder& d = scene.decoder;
  d.feature_dim = feature_dim;
  d.offsets_per_anchor = offsets_per_anchor;
  d.w_opacity.resize(offsets_per_anchor, feature_dim);
  d.w_scale.resize(3 * offsets_per_anchor, feature_dim);
  d.w_color.resize(3 * offsets_per_anchor, feature_dim);
  for (int r = 0; r < offsets_per_anchor; ++r)
    for (int c = 0; c < feature_dim; ++c) d.w_opacity(r, c) = rng.normal(0.2, 0.4);
  for (int r = 0; r < 3 * offsets_per_anchor; ++r)
    for (int c = 0; c < feature_dim; ++c) {
      d.w_scale(r, c) = rng.normal(-0.8, 0.3);
      d.w_color(r, c) = rng.normal(0.0, 0.5);
    }
  for (int a = 0; a < anchor_count; ++a) {
    Anchor anchor;
    anchor.position = {rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4),
                       rng.uniform(1.6, 2.8)};
    anchor.feature = Eigen::VectorXd::Zero(feature_dim);
    for (int f = 0; f < feature_dim; ++f) anchor.feature(f) = rng.normal(0.0, 0.8);
    anchor.offsets.resize(offsets_per_anchor, 3);
    for (int o = 0; o < offsets_per_anchor; ++o)
      anchor.offsets.row(o) = rng.uniform_in_cube(0.12).transpose();
    scene.anchors.push_back(std::move(anchor));
  }
  scene.gaussians = decode(scene.anchors, scene.decoder);

  CameraIntrinsics k;
  k.fx = 40.0;
  k.fy = 40.0;
  k.cx = 24.0;
  k.cy = 18.0;
  k.width = 48;
  k.height = 36;
  scene.training_views.push_back({Pose::identity(), k});
  return scene;
}

// A compact room scene shared by matcher/pnp/refine tests.
inline const GaussianScene& test_room_scene() {
  static const GaussianScene scene = [] {
    SceneConfig cfg;
    cfg.anchor_count = 240;
    cfg.training_view_count = 10;
    cfg.image_width = 320;
    cfg.image_height = 240;
    cfg.extent = {4.0, 4.0, 2.5};
    Rng rng(20240601);
    return generate_synthetic_scene(cfg, rng);
  }();
  return scene;
}

// Rejects probe pixels where finite differences straddle the 3-sigma footprint
// cutoff or the transmittance stop (the compositing is nondifferentiable
// there).
inline bool fd_safe_pixel(const std::vector<ProjectedGaussian>& projected, int x, int y) {
  double t = 1.0;
  for (const ProjectedGaussian& g : projected) {
    if (x < g.x_min || x > g.x_max || y < g.y_min || y > g.y_max) continue;
    const Eigen::Vector2d delta(x - g.center.x(), y - g.center.y());
    const double q = delta.dot(g.cov_inv * delta);
    if (q > 8.5 && q < 9.5) return false;
    if (q <= 9.0) {
      if (t < 5.0 * kTransmittanceMin) return false;
      t *= (1.0 - std::min(g.opacity * std::exp(-0.5 * q), kAlphaMax));
    }
  }
  return true;
}

}  // namespace gsreloc::testutil
