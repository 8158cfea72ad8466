#include "gsreloc/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace gsreloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// World->camera rigid fit minimizing ||pc - (R pw + t)||^2 (Horn/Umeyama).
bool procrustes(const std::vector<Eigen::Vector3d>& pw,
                const std::vector<Eigen::Vector3d>& pc, Eigen::Matrix3d* r,
                Eigen::Vector3d* t) {
  const std::size_t n = pw.size();
  Eigen::Vector3d cw = Eigen::Vector3d::Zero();
  Eigen::Vector3d cc = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cw += pw[i];
    cc += pc[i];
  }
  cw /= static_cast<double>(n);
  cc /= static_cast<double>(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) h += (pw[i] - cw) * (pc[i] - cc).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d rot = v * u.transpose();
  if (rot.determinant() < 0.0) {
    v.col(2) *= -1.0;
    rot = v * u.transpose();
  }
  if (!rot.allFinite()) return false;
  *r = rot;
  *t = cc - rot * cw;
  return true;
}

double reproj_rms_world_to_cam(const std::vector<Eigen::Vector3d>& pw,
                               const std::vector<Eigen::Vector2d>& px,
                               const CameraIntrinsics& k, const Eigen::Matrix3d& r,
                               const Eigen::Vector3d& t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pw.size(); ++i) {
    const Eigen::Vector3d pc = r * pw[i] + t;
    if (pc.z() <= 1e-12) return kInf;
    const double u = k.fx * pc.x() / pc.z() + k.cx;
    const double v = k.fy * pc.y() / pc.z() + k.cy;
    acc += (Eigen::Vector2d(u, v) - px[i]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(pw.size()));
}

// Quadratic beta monomials in the EPnP order
// [b11, b12, b22, b13, b23, b33, b14, b24, b34, b44] (truncated for nc < 4).
struct BetaSystem {
  int num_ctrl = 4;                               // control point count
  std::vector<std::array<int, 2>> pairs;          // control point index pairs
  std::vector<std::array<Eigen::Vector3d, 4>> dv; // per pair, per null vector
  Eigen::VectorXd rho;                            // squared control distances

  Eigen::Vector3d combination(std::size_t pair, const Eigen::Vector4d& betas) const {
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    for (int k = 0; k < num_ctrl - 1; ++k) s += betas(k) * dv[pair][k];
    return s;
  }
};

BetaSystem make_beta_system(const std::vector<Eigen::VectorXd>& null_vecs,
                            const std::vector<Eigen::Vector3d>& ctrl) {
  BetaSystem sys;
  sys.num_ctrl = static_cast<int>(ctrl.size());
  for (int i = 0; i < sys.num_ctrl; ++i)
    for (int j = i + 1; j < sys.num_ctrl; ++j) sys.pairs.push_back({i, j});
  sys.rho.resize(static_cast<Eigen::Index>(sys.pairs.size()));
  sys.dv.resize(sys.pairs.size());
  for (std::size_t p = 0; p < sys.pairs.size(); ++p) {
    const int i = sys.pairs[p][0];
    const int j = sys.pairs[p][1];
    sys.rho(static_cast<Eigen::Index>(p)) = (ctrl[i] - ctrl[j]).squaredNorm();
    for (std::size_t k = 0; k < null_vecs.size() && k < 4; ++k)
      sys.dv[p][k] = null_vecs[k].segment<3>(3 * i) - null_vecs[k].segment<3>(3 * j);
  }
  return sys;
}

void gauss_newton_betas(const BetaSystem& sys, int active, Eigen::Vector4d* betas) {
  const int rows = static_cast<int>(sys.pairs.size());
  for (int iter = 0; iter < 5; ++iter) {
    Eigen::MatrixXd jac(rows, active);
    Eigen::VectorXd res(rows);
    for (int p = 0; p < rows; ++p) {
      const Eigen::Vector3d s = sys.combination(p, *betas);
      res(p) = sys.rho(p) - s.squaredNorm();
      for (int m = 0; m < active; ++m) jac(p, m) = 2.0 * s.dot(sys.dv[p][m]);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * res;
    const Eigen::VectorXd step = jtj.ldlt().solve(jtr);
    if (!step.allFinite()) break;
    for (int m = 0; m < active; ++m) (*betas)(m) += step(m);
  }
}

// Least-squares over selected monomial columns of the distance system.
Eigen::VectorXd solve_beta_columns(const BetaSystem& sys,
                                   const std::vector<std::array<int, 2>>& monos) {
  const int rows = static_cast<int>(sys.pairs.size());
  const int cols = static_cast<int>(monos.size());
  Eigen::MatrixXd l(rows, cols);
  for (int p = 0; p < rows; ++p)
    for (int c = 0; c < cols; ++c) {
      const int a = monos[c][0];
      const int b = monos[c][1];
      const double factor = (a == b) ? 1.0 : 2.0;
      l(p, c) = factor * sys.dv[p][a].dot(sys.dv[p][b]);
    }
  return l.colPivHouseholderQr().solve(sys.rho);
}

Eigen::Vector4d betas_case_1(const BetaSystem& sys) {
  // Columns (b11, b12, b13[, b14]) -> beta1 and ratios.
  std::vector<std::array<int, 2>> monos = {{0, 0}, {0, 1}, {0, 2}};
  if (sys.num_ctrl == 4) monos.push_back({0, 3});
  const int avail = sys.num_ctrl - 1;
  monos.resize(static_cast<std::size_t>(std::min<int>(static_cast<int>(monos.size()), avail)));
  const Eigen::VectorXd x = solve_beta_columns(sys, monos);
  Eigen::Vector4d betas = Eigen::Vector4d::Zero();
  if (x(0) < 0.0) {
    betas(0) = std::sqrt(-x(0));
    for (int m = 1; m < x.size(); ++m) betas(m) = -x(m) / betas(0);
  } else {
    betas(0) = std::sqrt(x(0));
    for (int m = 1; m < x.size(); ++m) betas(m) = x(m) / betas(0);
  }
  if (!betas.allFinite()) betas = Eigen::Vector4d::UnitX();
  return betas;
}

Eigen::Vector4d betas_case_2(const BetaSystem& sys) {
  // Columns (b11, b12, b22).
  const Eigen::VectorXd x = solve_beta_columns(sys, {{0, 0}, {0, 1}, {1, 1}});
  Eigen::Vector4d betas = Eigen::Vector4d::Zero();
  if (x(0) < 0.0) {
    betas(0) = std::sqrt(-x(0));
    betas(1) = (x(2) < 0.0) ? std::sqrt(-x(2)) : 0.0;
  } else {
    betas(0) = std::sqrt(x(0));
    betas(1) = (x(2) > 0.0) ? std::sqrt(x(2)) : 0.0;
  }
  if (x(1) < 0.0) betas(0) = -betas(0);
  if (!betas.allFinite()) betas = Eigen::Vector4d::UnitX();
  return betas;
}

Eigen::Vector4d betas_case_3(const BetaSystem& sys) {
  // Columns (b11, b12, b22, b13, b23); only determined for 4 control points.
  const Eigen::VectorXd x =
      solve_beta_columns(sys, {{0, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}});
  Eigen::Vector4d betas = Eigen::Vector4d::Zero();
  if (x(0) < 0.0) {
    betas(0) = std::sqrt(-x(0));
    betas(1) = (x(2) < 0.0) ? std::sqrt(-x(2)) : 0.0;
  } else {
    betas(0) = std::sqrt(x(0));
    betas(1) = (x(2) > 0.0) ? std::sqrt(x(2)) : 0.0;
  }
  if (x(1) < 0.0) betas(0) = -betas(0);
  if (betas(0) != 0.0) betas(2) = x(3) / betas(0);
  if (!betas.allFinite()) betas = Eigen::Vector4d::UnitX();
  return betas;
}

struct EpnpCandidate {
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  double rms = kInf;
};

// Runs one control-point configuration (4 general / 3 planar) and reports the
// best candidate over null-space cases.
void run_epnp_path(const std::vector<Eigen::Vector3d>& pw,
                   const std::vector<Eigen::Vector2d>& px, const CameraIntrinsics& k,
                   const std::vector<Eigen::Vector3d>& ctrl, EpnpCandidate* best) {
  const std::size_t n = pw.size();
  const int nc = static_cast<int>(ctrl.size());
  const int dim = 3 * nc;

  // Barycentric coordinates (least squares for nc == 3 handles off-plane
  // points gracefully).
  Eigen::MatrixXd basis(3, nc - 1);
  for (int j = 1; j < nc; ++j) basis.col(j - 1) = ctrl[j] - ctrl[0];
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);
  if (gram_ldlt.info() != Eigen::Success) return;

  Eigen::MatrixXd alphas(n, nc);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd b = gram_ldlt.solve(basis.transpose() * (pw[i] - ctrl[0]));
    alphas(static_cast<Eigen::Index>(i), 0) = 1.0 - b.sum();
    for (int j = 1; j < nc; ++j) alphas(static_cast<Eigen::Index>(i), j) = b(j - 1);
  }

  // M matrix from the projection constraints.
  Eigen::MatrixXd m(2 * n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = px[i].x();
    const double v = px[i].y();
    for (int j = 0; j < nc; ++j) {
      const double a = alphas(static_cast<Eigen::Index>(i), j);
      m(2 * i, 3 * j + 0) = a * k.fx;
      m(2 * i, 3 * j + 1) = 0.0;
      m(2 * i, 3 * j + 2) = a * (k.cx - u);
      m(2 * i + 1, 3 * j + 0) = 0.0;
      m(2 * i + 1, 3 * j + 1) = a * k.fy;
      m(2 * i + 1, 3 * j + 2) = a * (k.cy - v);
    }
  }
  const Eigen::MatrixXd mtm = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mtm);
  if (eig.info() != Eigen::Success) return;

  const int n_null = (nc == 4) ? 4 : 3;
  std::vector<Eigen::VectorXd> null_vecs;
  for (int i = 0; i < n_null; ++i) null_vecs.push_back(eig.eigenvectors().col(i));

  const BetaSystem sys = make_beta_system(null_vecs, ctrl);
  std::vector<Eigen::Vector4d> seeds;
  seeds.push_back(betas_case_1(sys));
  seeds.push_back(betas_case_2(sys));
  if (nc == 4) seeds.push_back(betas_case_3(sys));

  for (Eigen::Vector4d betas : seeds) {
    gauss_newton_betas(sys, nc - 1, &betas);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    for (int kk = 0; kk < nc - 1; ++kk) x += betas(kk) * null_vecs[kk];

    std::vector<Eigen::Vector3d> pc(n);
    int positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector3d p = Eigen::Vector3d::Zero();
      for (int j = 0; j < nc; ++j)
        p += alphas(static_cast<Eigen::Index>(i), j) * x.segment<3>(3 * j);
      pc[i] = p;
      if (p.z() > 0.0) ++positive;
    }
    if (2 * positive < static_cast<int>(n)) {
      for (auto& p : pc) p = -p;
    }

    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    if (!procrustes(pw, pc, &r, &t)) continue;
    // Cheirality: the majority of points must land in front of the camera.
    int in_front = 0;
    for (std::size_t i = 0; i < n; ++i)
      if ((r * pw[i] + t).z() > 0.0) ++in_front;
    if (2 * in_front < static_cast<int>(n)) continue;
    const double rms = reproj_rms_world_to_cam(pw, px, k, r, t);
    if (rms < best->rms) {
      best->r = r;
      best->t = t;
      best->rms = rms;
    }
  }
}

}  // namespace

Pose epnp(std::span<const Eigen::Vector3d> points_world,
          std::span<const Eigen::Vector2d> pixels, const CameraIntrinsics& k) {
  const std::size_t n = points_world.size();
  if (n != pixels.size()) throw DimensionMismatch("points vs pixels");
  if (n < 4) throw TooFewPoints();

  const std::vector<Eigen::Vector3d> pw(points_world.begin(), points_world.end());
  const std::vector<Eigen::Vector2d> px(pixels.begin(), pixels.end());

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pw) centroid += p;
  centroid /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pw) cov += (p - centroid) * (p - centroid).transpose();
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);  // ascending
  const Eigen::Vector3d evals = eig.eigenvalues().cwiseMax(0.0);
  const double lead = evals(2);
  if (lead < 1e-18) throw DegenerateConfiguration("all points coincide");
  if (evals(1) / lead < 1e-12) throw DegenerateConfiguration("points are collinear");

  EpnpCandidate best;
  const double planarity = evals(0) / lead;
  if (planarity >= 1e-10) {
    std::vector<Eigen::Vector3d> ctrl(4);
    ctrl[0] = centroid;
    for (int i = 0; i < 3; ++i)
      ctrl[i + 1] = centroid + std::sqrt(evals(2 - i)) * eig.eigenvectors().col(2 - i);
    run_epnp_path(pw, px, k, ctrl, &best);
  }
  if (planarity < 1e-4) {
    // Near-planar: the 3-control-point parameterization is better conditioned.
    std::vector<Eigen::Vector3d> ctrl(3);
    ctrl[0] = centroid;
    ctrl[1] = centroid + std::sqrt(evals(2)) * eig.eigenvectors().col(2);
    ctrl[2] = centroid + std::sqrt(evals(1)) * eig.eigenvectors().col(1);
    run_epnp_path(pw, px, k, ctrl, &best);
  }
  if (!std::isfinite(best.rms)) throw DegenerateConfiguration("no valid candidate");

  // best is world->camera; return the camera-to-world pose.
  const Eigen::Matrix3d r_cw = best.r.transpose();
  return Pose(Eigen::Quaterniond(r_cw), -(r_cw * best.t));
}

std::vector<double> normalize_uncertainties(std::span<const double> uncertainties,
                                            double clip_lo, double clip_hi) {
  if (uncertainties.empty()) throw EmptyInput();
  std::vector<double> sorted(uncertainties.begin(), uncertainties.end());
  std::sort(sorted.begin(), sorted.end());
  const auto percentile = [&](double q) {
    const double rank = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  const double p_lo = percentile(clip_lo);
  const double p_hi = percentile(clip_hi);
  std::vector<double> out(uncertainties.size(), 0.0);
  const double range = p_hi - p_lo;
  if (range > 0.0) {
    for (std::size_t i = 0; i < uncertainties.size(); ++i)
      out[i] = std::clamp((uncertainties[i] - p_lo) / range, 0.0, 1.0);
  }
  // Constant input: no information, uniform maximal trust (all zeros).
  return out;
}

SamplingWeights compute_sampling_weights(std::span<const double> uncertainties,
                                         double beta, double epsilon, double clip_lo,
                                         double clip_hi) {
  if (beta <= 0.0 || epsilon <= 0.0) throw InvalidConfig("beta and epsilon must be > 0");
  SamplingWeights w;
  w.beta = beta;
  w.epsilon = epsilon;
  w.clip_lo = clip_lo;
  w.clip_hi = clip_hi;
  const std::vector<double> u_norm = normalize_uncertainties(uncertainties, clip_lo, clip_hi);
  w.s.resize(u_norm.size());
  for (std::size_t i = 0; i < u_norm.size(); ++i)
    w.s[i] = std::exp(-beta * u_norm[i]) + epsilon;
  return w;
}

std::vector<SolverPoint> to_solver_points(const CorrespondenceSet& set) {
  std::vector<SolverPoint> out;
  out.reserve(set.matches.size());
  for (const Match& m : set.matches) out.push_back({m.q, m.lifted_point});
  return out;
}

namespace {

// Sequential proportional draws without replacement; the first draw is exact
// with probability s_i / sum(s).
std::vector<int> sample_proportional(const std::vector<double>& s,
                                     const std::vector<int>& candidates, int count,
                                     Rng& rng) {
  std::vector<int> picked;
  picked.reserve(count);
  std::vector<char> used(candidates.size(), 0);
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += s[i];
  for (int draw = 0; draw < count; ++draw) {
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int chosen = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (used[i]) continue;
      acc += s[i];
      if (acc > u) {
        chosen = static_cast<int>(i);
        break;
      }
    }
    if (chosen < 0) {
      for (std::size_t i = candidates.size(); i-- > 0;) {
        if (!used[i]) {
          chosen = static_cast<int>(i);
          break;
        }
      }
    }
    used[chosen] = 1;
    total -= s[chosen];
    picked.push_back(candidates[chosen]);
  }
  return picked;
}

double reproj_error_px(const Pose& pose, const CameraIntrinsics& k, const SolverPoint& sp) {
  try {
    const Projection pr = project(pose, k, *sp.point_world);
    return (pr.pixel - sp.pixel).norm();
  } catch (const NonPositiveDepth&) {
    return kInf;
  }
}

}  // namespace

PnPResult ransac_pnp(std::span<const SolverPoint> correspondences,
                     const CameraIntrinsics& k, const SamplingWeights* weights,
                     const RansacConfig& config, Rng& rng) {
  std::vector<int> lifted;
  for (std::size_t i = 0; i < correspondences.size(); ++i)
    if (correspondences[i].point_world) lifted.push_back(static_cast<int>(i));
  const int n = static_cast<int>(lifted.size());
  if (n < config.min_sample) throw TooFewPoints();
  if (weights && weights->s.size() != correspondences.size())
    throw DimensionMismatch("weights vs correspondences");

  std::vector<double> s(lifted.size(), 1.0);
  if (weights)
    for (std::size_t j = 0; j < lifted.size(); ++j) s[j] = weights->s[lifted[j]];

  const auto score_pose = [&](const Pose& pose, std::vector<bool>* mask, double* score,
                              int* count) {
    mask->assign(correspondences.size(), false);
    *score = 0.0;
    *count = 0;
    for (std::size_t j = 0; j < lifted.size(); ++j) {
      const int idx = lifted[j];
      if (reproj_error_px(pose, k, correspondences[idx]) <= config.reproj_threshold_px) {
        (*mask)[idx] = true;
        *score += s[j];
        ++(*count);
      }
    }
  };

  Pose best_pose;
  std::vector<bool> best_mask(correspondences.size(), false);
  double best_score = -1.0;
  int best_count = 0;
  int iterations = 0;

  std::vector<Eigen::Vector3d> sample_pts(config.min_sample);
  std::vector<Eigen::Vector2d> sample_pxs(config.min_sample);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    ++iterations;
    const std::vector<int> sample = sample_proportional(s, lifted, config.min_sample, rng);
    for (int j = 0; j < config.min_sample; ++j) {
      sample_pts[j] = *correspondences[sample[j]].point_world;
      sample_pxs[j] = correspondences[sample[j]].pixel;
    }
    Pose hyp;
    bool solved = true;
    try {
      hyp = epnp(sample_pts, sample_pxs, k);
    } catch (const Error&) {
      solved = false;
    }
    if (solved) {
      std::vector<bool> mask;
      double score = 0.0;
      int count = 0;
      score_pose(hyp, &mask, &score, &count);
      if (count >= config.min_sample && score > best_score) {
        best_pose = hyp;
        best_mask = std::move(mask);
        best_score = score;
        best_count = count;
      }
    }
    // Adaptive stop on the unweighted inlier ratio.
    if (best_count >= config.min_sample) {
      const double ratio = static_cast<double>(best_count) / n;
      const double p_clean = std::pow(ratio, config.min_sample);
      if (1.0 - std::pow(1.0 - p_clean, iterations) >= config.confidence) break;
    }
  }
  if (best_count < config.min_sample) throw NoHypothesisFound();

  // Re-fit on all inliers of the best hypothesis; keep whichever scores best.
  std::vector<Eigen::Vector3d> in_pts;
  std::vector<Eigen::Vector2d> in_pxs;
  for (std::size_t i = 0; i < correspondences.size(); ++i) {
    if (!best_mask[i]) continue;
    in_pts.push_back(*correspondences[i].point_world);
    in_pxs.push_back(correspondences[i].pixel);
  }
  try {
    const Pose refit = epnp(in_pts, in_pxs, k);
    std::vector<bool> mask;
    double score = 0.0;
    int count = 0;
    score_pose(refit, &mask, &score, &count);
    if (count >= config.min_sample && score >= best_score) {
      best_pose = refit;
      best_mask = std::move(mask);
      best_score = score;
    }
  } catch (const Error&) {
    // Keep the hypothesis pose.
  }

  PnPResult result;
  result.pose = best_pose;
  result.inlier_mask = std::move(best_mask);
  result.weighted_consensus = best_score;
  result.iterations_used = iterations;
  return result;
}

double match_score_sum(const CorrespondenceSet& set) {
  if (set.matches.empty()) return 0.0;
  std::vector<double> us(set.matches.size());
  for (std::size_t i = 0; i < set.matches.size(); ++i) us[i] = set.matches[i].uncertainty;
  const std::vector<double> u_norm = normalize_uncertainties(us);
  double acc = 0.0;
  for (std::size_t i = 0; i < set.matches.size(); ++i)
    acc += set.matches[i].confidence * (1.0 - u_norm[i]);
  return acc;
}

LocalRefineResult local_refine(const Pose& pose_init, const LocalRefineInputs& inputs,
                               Rng& rng) {
  LocalRefineResult result;
  RenderChannels channels;
  channels.color = false;
  channels.uncertainty = inputs.traces != nullptr;
  const RenderBuffers buffers = render_primitives(
      inputs.scene->gaussians, pose_init, inputs.intrinsics, inputs.traces, channels);

  CorrespondenceSet matches;
  try {
    matches = generate_matches(*inputs.scene, inputs.query_pose_truth, pose_init,
                               inputs.intrinsics, buffers.depth, inputs.matcher, rng,
                               inputs.query_depth);
  } catch (const NotEnoughVisiblePoints&) {
    return result;  // failed particle
  }
  matches = lift_matches(std::move(matches), pose_init, inputs.intrinsics, buffers.depth,
                         buffers.uncertainty);
  result.matches = matches;
  result.score_sum = match_score_sum(matches);
  result.aggregates = aggregate_scores(matches);

  SamplingWeights weights;
  const SamplingWeights* weights_ptr = nullptr;
  if (inputs.use_uncertainty_weights) {
    std::vector<double> us(matches.matches.size());
    for (std::size_t i = 0; i < matches.matches.size(); ++i)
      us[i] = matches.matches[i].uncertainty;
    weights = compute_sampling_weights(us, inputs.ransac.beta, inputs.ransac.epsilon);
    weights_ptr = &weights;
  }

  const std::vector<SolverPoint> pts = to_solver_points(matches);
  try {
    result.pnp = ransac_pnp(pts, inputs.intrinsics, weights_ptr, inputs.ransac, rng);
  } catch (const Error&) {
    return result;  // failed particle, matches kept for diagnostics
  }
  result.ok = true;
  return result;
}

}  // namespace gsreloc
