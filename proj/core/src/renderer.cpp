#include "gsreloc/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace gsreloc {

std::vector<ProjectedGaussian> project_gaussians(std::span<const GaussianPrimitive> gaussians,
                                                 const Pose& pose,
                                                 const CameraIntrinsics& k) {
  const Eigen::Matrix3d r_wc = pose.rotation_matrix().transpose();
  const Eigen::Vector3d t = pose.translation;
  const double max_radius = 4.0 * std::max(k.width, k.height);

  std::vector<ProjectedGaussian> out;
  out.reserve(gaussians.size());
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const GaussianPrimitive& g = gaussians[i];
    const Eigen::Vector3d xc = r_wc * (g.mean - t);
    if (xc.z() <= kMinCameraDepth) continue;
    const double z = xc.z();
    const double inv_z = 1.0 / z;

    ProjectedGaussian p;
    p.index = static_cast<int>(i);
    p.depth = z;
    p.x_cam = xc;
    p.center = {k.fx * xc.x() * inv_z + k.cx, k.fy * xc.y() * inv_z + k.cy};
    p.opacity = g.opacity;
    p.color = g.color;

    Eigen::Matrix<double, 2, 3> jproj;
    jproj << k.fx * inv_z, 0.0, -k.fx * xc.x() * inv_z * inv_z,
             0.0, k.fy * inv_z, -k.fy * xc.y() * inv_z * inv_z;
    const Eigen::Matrix3d cov_world = g.scale.array().square().matrix().asDiagonal();
    const Eigen::Matrix3d cov_cam = r_wc * cov_world * r_wc.transpose();
    p.cov = jproj * cov_cam * jproj.transpose();

    const double det = p.cov(0, 0) * p.cov(1, 1) - p.cov(0, 1) * p.cov(1, 0);
    if (!(det > 0.0) || !std::isfinite(det)) continue;
    p.cov_inv << p.cov(1, 1) / det, -p.cov(0, 1) / det,
                 -p.cov(1, 0) / det, p.cov(0, 0) / det;

    const double half_trace = 0.5 * (p.cov(0, 0) + p.cov(1, 1));
    const double disc = half_trace * half_trace - det;
    const double lambda_max = half_trace + std::sqrt(std::max(disc, 0.0));
    double radius = kFootprintSigmaCut * std::sqrt(lambda_max);
    radius = std::min(radius, max_radius);

    p.x_min = std::max(0, static_cast<int>(std::ceil(p.center.x() - radius)));
    p.x_max = std::min(k.width - 1, static_cast<int>(std::floor(p.center.x() + radius)));
    p.y_min = std::max(0, static_cast<int>(std::ceil(p.center.y() - radius)));
    p.y_max = std::min(k.height - 1, static_cast<int>(std::floor(p.center.y() + radius)));
    if (p.x_min > p.x_max || p.y_min > p.y_max) continue;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.index < b.index;
  });
  return out;
}

double eval_alpha(const ProjectedGaussian& g, double px, double py,
                  Eigen::Vector2d* delta_out, Eigen::Vector2d* v_out, double* gauss_out) {
  const Eigen::Vector2d delta(px - g.center.x(), py - g.center.y());
  const Eigen::Vector2d v = g.cov_inv * delta;
  const double q = delta.dot(v);
  if (q > kFootprintSigmaCut * kFootprintSigmaCut) return 0.0;
  const double gauss = std::exp(-0.5 * q);
  if (delta_out) *delta_out = delta;
  if (v_out) *v_out = v;
  if (gauss_out) *gauss_out = gauss;
  return std::min(g.opacity * gauss, kAlphaMax);
}

RenderBuffers render_primitives(std::span<const GaussianPrimitive> gaussians,
                                const Pose& pose, const CameraIntrinsics& k,
                                const std::vector<double>* per_gaussian_trace,
                                const RenderChannels& channels) {
  const int w = k.width;
  const int h = k.height;
  const std::size_t n_total = gaussians.size();
  if (per_gaussian_trace && per_gaussian_trace->size() != n_total)
    throw TraceLengthMismatch();

  RenderBuffers buffers;
  buffers.color = ImageBuffer(w, h, 3);
  buffers.depth = ImageBuffer(w, h, 1);
  buffers.uncertainty = ImageBuffer(w, h, 1);
  buffers.accumulated_alpha = ImageBuffer(w, h, 1);

  const std::vector<ProjectedGaussian> projected = project_gaussians(gaussians, pose, k);

  const std::size_t npx = static_cast<std::size_t>(w) * h;
  std::vector<double> transmittance(npx, 1.0);
  std::vector<double> depth_sum(npx, 0.0);
  std::vector<double> weight_sum(npx, 0.0);

  const bool do_unc = channels.uncertainty && per_gaussian_trace != nullptr;
  const double inv_n = n_total > 0 ? 1.0 / static_cast<double>(n_total) : 0.0;

  for (const ProjectedGaussian& g : projected) {
    const double trace = do_unc ? (*per_gaussian_trace)[g.index] : 0.0;
    for (int y = g.y_min; y <= g.y_max; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * w;
      for (int x = g.x_min; x <= g.x_max; ++x) {
        double& t = transmittance[row + x];
        if (t < kTransmittanceMin) continue;
        const double alpha = eval_alpha(g, x, y);
        if (alpha <= 0.0) continue;
        const double wgt = alpha * t;
        if (channels.color) {
          double* c = &buffers.color.data[(row + x) * 3];
          c[0] += g.color.x() * wgt;
          c[1] += g.color.y() * wgt;
          c[2] += g.color.z() * wgt;
        }
        depth_sum[row + x] += g.depth * wgt;
        weight_sum[row + x] += wgt;
        if (do_unc) buffers.uncertainty.data[row + x] += trace * g.depth * wgt * inv_n;
        t *= (1.0 - alpha);
      }
    }
  }

  for (std::size_t i = 0; i < npx; ++i) {
    buffers.depth.data[i] = weight_sum[i] < kWeightSumMin ? 0.0 : depth_sum[i] / weight_sum[i];
    buffers.accumulated_alpha.data[i] = 1.0 - transmittance[i];
  }
  return buffers;
}

RenderBuffers render(const GaussianScene& scene, const Pose& pose,
                     const CameraIntrinsics& intrinsics,
                     const std::vector<double>* per_gaussian_trace) {
  return render_primitives(scene.gaussians, pose, intrinsics, per_gaussian_trace, {});
}

ImageBuffer render_depth_only(const GaussianScene& scene, const Pose& pose,
                              const CameraIntrinsics& intrinsics) {
  RenderChannels ch;
  ch.color = false;
  ch.uncertainty = false;
  return render_primitives(scene.gaussians, pose, intrinsics, nullptr, ch).depth;
}

namespace {

// Valid-region (no padding) separable gaussian filtering of an H x W plane.
// Output is (h - win + 1) x (w - win + 1).
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h,
                                 const std::vector<double>& kernel) {
  const int win = static_cast<int>(kernel.size());
  const int ow = w - win + 1;
  const int oh = h - win + 1;
  std::vector<double> horiz(static_cast<std::size_t>(ow) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < win; ++i) acc += kernel[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      horiz[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < win; ++i) acc += kernel[i] * horiz[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

double ssim_from_stats(double mu1, double mu2, double x11, double x22, double x12) {
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const double var1 = x11 - mu1 * mu1;
  const double var2 = x22 - mu2 * mu2;
  const double cov = x12 - mu1 * mu2;
  return ((2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)) /
         ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("ssim inputs");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;

  const int w = a.width;
  const int h = a.height;
  const int nc = a.channels;

  if (w < kWin || h < kWin) {
    // Single global window with uniform weights.
    double total = 0.0;
    for (int c = 0; c < nc; ++c) {
      double mu1 = 0, mu2 = 0, x11 = 0, x22 = 0, x12 = 0;
      const double inv = 1.0 / static_cast<double>(a.pixel_count());
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double va = a.at(x, y, c);
          const double vb = b.at(x, y, c);
          mu1 += va * inv;
          mu2 += vb * inv;
          x11 += va * va * inv;
          x22 += vb * vb * inv;
          x12 += va * vb * inv;
        }
      total += ssim_from_stats(mu1, mu2, x11, x22, x12);
    }
    return total / nc;
  }

  std::vector<double> kernel(kWin);
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    kernel[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
    ksum += kernel[i];
  }
  for (double& v : kernel) v /= ksum;

  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    std::vector<double> pa(a.pixel_count()), pb(a.pixel_count());
    std::vector<double> paa(a.pixel_count()), pbb(a.pixel_count()), pab(a.pixel_count());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double va = a.at(x, y, c);
        const double vb = b.at(x, y, c);
        pa[i] = va;
        pb[i] = vb;
        paa[i] = va * va;
        pbb[i] = vb * vb;
        pab[i] = va * vb;
      }
    const auto mu1 = filter_valid(pa, w, h, kernel);
    const auto mu2 = filter_valid(pb, w, h, kernel);
    const auto x11 = filter_valid(paa, w, h, kernel);
    const auto x22 = filter_valid(pbb, w, h, kernel);
    const auto x12 = filter_valid(pab, w, h, kernel);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.size(); ++i)
      acc += ssim_from_stats(mu1[i], mu2[i], x11[i], x22[i], x12[i]);
    total += acc / static_cast<double>(mu1.size());
  }
  return total / nc;
}

}  // namespace gsreloc
