#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsreloc/renderer.hpp"
#include "gsreloc/scene.hpp"

namespace gsreloc {

struct PixelRef {
  int x = 0;
  int y = 0;
};

// Flat indexing of theta = per-anchor (feature F-vector, offsets Ox3).
struct ParameterLayout {
  int anchor_count = 0;
  int feature_dim = 0;
  int offsets_per_anchor = 0;

  int per_anchor() const { return feature_dim + 3 * offsets_per_anchor; }
  int size() const { return anchor_count * per_anchor(); }
  int feature_index(int anchor, int f) const { return anchor * per_anchor() + f; }
  int offset_index(int anchor, int o, int c) const {
    return anchor * per_anchor() + feature_dim + 3 * o + c;
  }

  struct Description {
    int anchor = -1;
    bool is_feature = false;
    int feature = -1;  // valid when is_feature
    int offset = -1;   // valid otherwise
    int coord = -1;
  };
  Description describe(int index) const;

  static ParameterLayout for_scene(const GaussianScene& scene) {
    return {static_cast<int>(scene.anchors.size()), scene.feature_dim(),
            scene.offsets_per_anchor()};
  }
};

struct JacobianEntry {
  int param = 0;
  double value = 0.0;
};

// Sparse Jacobian rows of the rendered RGB at one pixel.
struct PixelJacobian {
  PixelRef pixel;
  std::array<std::vector<JacobianEntry>, 3> channels;
};

// Analytic derivatives of the composited color w.r.t. theta. Entries are
// sorted by parameter index; parameters with no influence are absent.
std::vector<PixelJacobian> render_jacobian(const GaussianScene& scene,
                                           const TrainingView& view,
                                           std::span<const PixelRef> pixels);

struct DiagonalFisher {
  Eigen::VectorXd diag;
  double lambda = 0.0;
};

// diag[k] = sum over pixels and channels of J[p,k]^2, plus lambda.
DiagonalFisher fisher_diag(const GaussianScene& scene, const TrainingView& view,
                           double lambda, std::span<const PixelRef> pixels);

struct GlobalFisher {
  Eigen::VectorXd diag;
  int view_count = 0;
};

// Entrywise sum of per-view diagonals (order-independent).
GlobalFisher accumulate(std::span<const DiagonalFisher> views);

struct FisherOptions {
  double lambda = 1e-6;
  int pixel_stride = 2;  // stratified grid; 1 = full-image reference mode
  int threads = 1;
};

GlobalFisher compute_global_fisher(const GaussianScene& scene,
                                   std::span<const TrainingView> views,
                                   const FisherOptions& options = {});

using PerGaussianTrace = std::vector<double>;

// trace[i] = sum of global diagonal entries over gaussian i's anchor feature
// block plus its own offset row. Anchors shared by O children contribute
// their feature block to each child.
PerGaussianTrace per_gaussian_trace(const GlobalFisher& global, const GaussianScene& scene);

std::vector<PixelRef> strided_pixel_grid(const CameraIntrinsics& intrinsics, int stride);

// Binary cache for {global diag, traces}; keyed externally.
void save_fisher_cache(const GlobalFisher& global, const PerGaussianTrace& traces,
                       const std::string& path);
bool load_fisher_cache(const std::string& path, GlobalFisher* global,
                       PerGaussianTrace* traces);

}  // namespace gsreloc
