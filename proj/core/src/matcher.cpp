#include "gsreloc/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

namespace gsreloc {

using json = nlohmann::ordered_json;

namespace {

int round_px(double v) { return static_cast<int>(std::lround(v)); }

bool lookup_depth(const ImageBuffer& depth, const Eigen::Vector2d& px, double* out) {
  const int x = round_px(px.x());
  const int y = round_px(px.y());
  if (x < 0 || x >= depth.width || y < 0 || y >= depth.height) return false;
  *out = depth.at(x, y);
  return true;
}

Eigen::Vector2d clamp_to_image(const Eigen::Vector2d& px, const CameraIntrinsics& k) {
  return {std::clamp(px.x(), 0.0, static_cast<double>(k.width - 1)),
          std::clamp(px.y(), 0.0, static_cast<double>(k.height - 1))};
}

// True geometric error of a match as the solver will consume it: lift the
// rendered-view pixel through the depth map and reproject into the query.
double match_error_px(const Pose& query_pose, const Pose& render_pose,
                      const CameraIntrinsics& k, const ImageBuffer& depth_map,
                      const Eigen::Vector2d& r, const Eigen::Vector2d& q) {
  const double far_err = std::hypot(k.width, k.height);
  double z = 0.0;
  if (!lookup_depth(depth_map, r, &z) || z <= 0.0) return far_err;
  try {
    const Eigen::Vector3d x = lift(render_pose, k, r, z);
    const Projection proj = project(query_pose, k, x);
    return (proj.pixel - q).norm();
  } catch (const Error&) {
    return far_err;
  }
}

}  // namespace

CorrespondenceSet generate_matches(const GaussianScene& scene, const Pose& query_pose_truth,
                                   const Pose& render_pose, const CameraIntrinsics& k,
                                   const ImageBuffer& depth_map, const MatcherConfig& config,
                                   Rng& rng, const ImageBuffer* query_depth_map) {
  if (config.inlier_count < 4) throw InvalidConfig("inlier_count must be >= 4");
  if (config.outlier_fraction < 0.0 || config.outlier_fraction >= 1.0)
    throw InvalidConfig("outlier_fraction in [0,1)");
  if (depth_map.width != k.width || depth_map.height != k.height)
    throw MapDimensionMismatch("depth map vs intrinsics");

  ImageBuffer query_depth_local;
  const ImageBuffer* query_depth = query_depth_map;
  if (query_depth == nullptr) {
    query_depth_local = render_depth_only(scene, query_pose_truth, k);
    query_depth = &query_depth_local;
  }
  if (query_depth->width != k.width || query_depth->height != k.height)
    throw MapDimensionMismatch("query depth map vs intrinsics");

  const int n_in = config.inlier_count;
  int n_out = static_cast<int>(std::lround(
      n_in * config.outlier_fraction / (1.0 - config.outlier_fraction)));
  int total = n_in + n_out;

  // Viewpoint gap between the render hypothesis and the query.
  const PoseError gap = pose_error(render_pose, query_pose_truth);
  const double sigma_eff =
      config.pixel_noise_sigma *
      (1.0 + config.noise_gain_per_m * gap.translation_m +
       config.noise_gain_per_deg * gap.rotation_deg);
  const double bias_mag = config.bias_px_per_m * gap.translation_m +
                          config.bias_px_per_deg * gap.rotation_deg;
  Eigen::Vector2d bias = Eigen::Vector2d::Zero();
  if (bias_mag > 0.0) {
    // Drift direction fixed by the render pose, reproducible across calls.
    std::uint64_t h = 0;
    for (double v : render_pose.to_array()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      h = mix64(h ^ bits);
    }
    const double angle = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 * 3.14159265358979323846;
    bias = bias_mag * Eigen::Vector2d(std::cos(angle), std::sin(angle));
  }

  // Sample co-visible world points from the rendered surface.
  std::vector<Eigen::Vector3d> points;
  points.reserve(total);
  const int max_attempts = 10 * total;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(points.size()) < total;
       ++attempt) {
    const int ix = rng.uniform_int(k.width);
    const int iy = rng.uniform_int(k.height);
    const double z = depth_map.at(ix, iy);
    if (z <= 0.0) continue;
    Eigen::Vector3d x;
    try {
      x = lift(render_pose, k, Eigen::Vector2d(ix, iy), z);
    } catch (const Error&) {
      continue;
    }
    Projection proj_q;
    try {
      proj_q = project(query_pose_truth, k, x);
    } catch (const NonPositiveDepth&) {
      continue;
    }
    if (!k.in_bounds(proj_q.pixel)) continue;
    double dq = 0.0;
    if (!lookup_depth(*query_depth, proj_q.pixel, &dq)) continue;
    if (std::abs(proj_q.depth - dq) > config.covisibility_depth_tol) continue;
    points.push_back(x);
  }
  if (static_cast<int>(points.size()) < n_in) throw NotEnoughVisiblePoints();
  if (static_cast<int>(points.size()) < total) {
    n_out = static_cast<int>(points.size()) - n_in;
    total = n_in + n_out;
  }

  CorrespondenceSet set;
  set.query_pose_truth = query_pose_truth;
  set.render_pose = render_pose;
  set.intrinsics = k;
  set.matches.reserve(total);
  for (int i = 0; i < total; ++i) {
    const Eigen::Vector3d& x = points[i];
    const bool outlier = i >= n_in;
    Match m;
    m.is_outlier_truth = outlier;
    const Eigen::Vector2d q_exact = project(query_pose_truth, k, x).pixel;
    if (outlier) {
      // Break geometric consistency on the rendered side.
      const double rx = rng.uniform(0.0, static_cast<double>(k.width - 1));
      const double ry = rng.uniform(0.0, static_cast<double>(k.height - 1));
      m.r = {rx, ry};
    } else {
      const Eigen::Vector2d r_exact = project(render_pose, k, x).pixel;
      const Eigen::Vector2d noise(rng.normal(0.0, sigma_eff), rng.normal(0.0, sigma_eff));
      m.r = clamp_to_image(r_exact + bias + noise, k);
    }
    const Eigen::Vector2d q_noise(rng.normal(0.0, sigma_eff), rng.normal(0.0, sigma_eff));
    m.q = clamp_to_image(q_exact + q_noise, k);
    const double err =
        match_error_px(query_pose_truth, render_pose, k, depth_map, m.r, m.q);
    const double conf = std::exp(-err / config.confidence_tau_px) +
                        rng.normal(0.0, config.confidence_noise_sigma);
    m.confidence = std::clamp(conf, 0.0, 1.0);
    set.matches.push_back(std::move(m));
  }
  return set;
}

CorrespondenceSet lift_matches(CorrespondenceSet set, const Pose& render_pose,
                               const CameraIntrinsics& k, const ImageBuffer& depth_map,
                               const ImageBuffer& uncertainty_map) {
  if (depth_map.width != k.width || depth_map.height != k.height)
    throw MapDimensionMismatch("depth map vs intrinsics");
  if (uncertainty_map.width != k.width || uncertainty_map.height != k.height)
    throw MapDimensionMismatch("uncertainty map vs intrinsics");
  set.render_pose = render_pose;
  set.intrinsics = k;
  for (Match& m : set.matches) {
    double z = 0.0;
    const bool ok = lookup_depth(depth_map, m.r, &z);
    if (ok && z > 0.0) {
      m.lifted_point = lift(render_pose, k, m.r, z);
    } else {
      m.lifted_point.reset();
    }
    double u = 0.0;
    if (lookup_depth(uncertainty_map, m.r, &u)) m.uncertainty = u;
  }
  return set;
}

AggregateScores aggregate_scores(const CorrespondenceSet& set) {
  AggregateScores s;
  for (const Match& m : set.matches) {
    s.confidence_sum += m.confidence;
    s.uncertainty_sum += m.uncertainty;
  }
  return s;
}

std::string correspondences_to_json(const CorrespondenceSet& set) {
  json j;
  json jk;
  const CameraIntrinsics& k = set.intrinsics;
  jk = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
        {"width", k.width}, {"height", k.height}};
  j["intrinsics"] = std::move(jk);
  json rp = json::array();
  for (double v : set.render_pose.to_array()) rp.push_back(v);
  j["render_pose"] = std::move(rp);
  json matches = json::array();
  for (const Match& m : set.matches) {
    json jm;
    jm["q"] = {m.q.x(), m.q.y()};
    jm["r"] = {m.r.x(), m.r.y()};
    jm["confidence"] = m.confidence;
    jm["uncertainty"] = m.uncertainty;
    if (m.lifted_point)
      jm["lifted_point"] = {m.lifted_point->x(), m.lifted_point->y(), m.lifted_point->z()};
    else
      jm["lifted_point"] = nullptr;
    matches.push_back(std::move(jm));
  }
  j["matches"] = std::move(matches);
  json truth;
  json qp = json::array();
  for (double v : set.query_pose_truth.to_array()) qp.push_back(v);
  truth["query_pose"] = std::move(qp);
  json mask = json::array();
  for (const Match& m : set.matches) mask.push_back(m.is_outlier_truth);
  truth["outlier_mask"] = std::move(mask);
  j["truth"] = std::move(truth);
  return j.dump(2);
}

CorrespondenceSet correspondences_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  try {
    CorrespondenceSet set;
    const json& jk = j.at("intrinsics");
    set.intrinsics.fx = jk.at("fx").get<double>();
    set.intrinsics.fy = jk.at("fy").get<double>();
    set.intrinsics.cx = jk.at("cx").get<double>();
    set.intrinsics.cy = jk.at("cy").get<double>();
    set.intrinsics.width = jk.at("width").get<int>();
    set.intrinsics.height = jk.at("height").get<int>();
    std::array<double, 7> a{};
    for (int i = 0; i < 7; ++i) a[i] = j.at("render_pose").at(i).get<double>();
    set.render_pose = Pose::from_array(a);
    for (const json& jm : j.at("matches")) {
      Match m;
      m.q = {jm.at("q").at(0).get<double>(), jm.at("q").at(1).get<double>()};
      m.r = {jm.at("r").at(0).get<double>(), jm.at("r").at(1).get<double>()};
      m.confidence = jm.at("confidence").get<double>();
      m.uncertainty = jm.at("uncertainty").get<double>();
      if (!jm.at("lifted_point").is_null()) {
        const json& lp = jm.at("lifted_point");
        m.lifted_point = Eigen::Vector3d(lp.at(0).get<double>(), lp.at(1).get<double>(),
                                         lp.at(2).get<double>());
      }
      set.matches.push_back(std::move(m));
    }
    if (j.contains("truth")) {
      const json& truth = j.at("truth");
      for (int i = 0; i < 7; ++i) a[i] = truth.at("query_pose").at(i).get<double>();
      set.query_pose_truth = Pose::from_array(a);
      const json& mask = truth.at("outlier_mask");
      for (std::size_t i = 0; i < mask.size() && i < set.matches.size(); ++i)
        set.matches[i].is_outlier_truth = mask.at(i).get<bool>();
    }
    return set;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

}  // namespace gsreloc
