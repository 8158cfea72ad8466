#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "gsreloc/image.hpp"
#include "gsreloc/scene.hpp"
#include "gsreloc/se3.hpp"

namespace gsreloc {

// Compositing constants, fixed repo-wide.
constexpr double kAlphaMax = 0.999;          // keeps transmittance nonzero
constexpr double kTransmittanceMin = 1e-4;   // per-pixel compositing stop
constexpr double kWeightSumMin = 1e-6;       // below this the depth pixel is 0
constexpr double kFootprintSigmaCut = 3.0;   // footprint truncation
constexpr double kMinCameraDepth = 1e-6;     // cull gaussians behind this

struct RenderBuffers {
  ImageBuffer color;              // H x W x 3 in [0,1]
  ImageBuffer depth;              // H x W, meters (0 where nothing rendered)
  ImageBuffer uncertainty;        // H x W, >= 0
  ImageBuffer accumulated_alpha;  // H x W in [0,1]
};

struct RenderChannels {
  bool color = true;
  bool uncertainty = true;
};

// A gaussian projected into a view: 2D footprint plus cached quantities for
// alpha evaluation and Jacobians.
struct ProjectedGaussian {
  int index = -1;             // position in the input gaussian list
  double depth = 0.0;         // camera-frame z of the mean
  Eigen::Vector2d center;     // projected mean, pixels
  Eigen::Matrix2d cov;        // 2D footprint covariance
  Eigen::Matrix2d cov_inv;
  double opacity = 0.0;
  Eigen::Vector3d color;
  Eigen::Vector3d x_cam;      // camera-frame mean
  int x_min = 0, x_max = -1;  // inclusive pixel bbox, clipped to the image
  int y_min = 0, y_max = -1;
};

// Culls, projects and depth-sorts (ties broken by index).
std::vector<ProjectedGaussian> project_gaussians(std::span<const GaussianPrimitive> gaussians,
                                                 const Pose& pose,
                                                 const CameraIntrinsics& intrinsics);

// Alpha of a footprint at a pixel center; 0 outside the 3-sigma ellipse.
// Optionally reports delta = p - center, v = cov_inv * delta and the pure
// footprint value gauss = exp(-q/2) (alpha = min(opacity*gauss, kAlphaMax)).
double eval_alpha(const ProjectedGaussian& g, double px, double py,
                  Eigen::Vector2d* delta = nullptr, Eigen::Vector2d* v = nullptr,
                  double* gauss = nullptr);

// Front-to-back alpha-composited color/depth/uncertainty. When
// per_gaussian_trace is present, uncertainty[p] = (1/N) sum_i tr_i d_i a_i T_i
// with N the total gaussian count.
RenderBuffers render(const GaussianScene& scene, const Pose& pose,
                     const CameraIntrinsics& intrinsics,
                     const std::vector<double>* per_gaussian_trace = nullptr);

RenderBuffers render_primitives(std::span<const GaussianPrimitive> gaussians,
                                const Pose& pose, const CameraIntrinsics& intrinsics,
                                const std::vector<double>* per_gaussian_trace = nullptr,
                                const RenderChannels& channels = {});

ImageBuffer render_depth_only(const GaussianScene& scene, const Pose& pose,
                              const CameraIntrinsics& intrinsics);

// Mean SSIM (11x11 gaussian window, sigma 1.5, k1=0.01, k2=0.03, L=1) over
// valid pixels, averaged across channels. Falls back to a single global
// window for images smaller than the window.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace gsreloc
