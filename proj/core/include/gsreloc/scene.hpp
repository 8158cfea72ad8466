#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsreloc/errors.hpp"
#include "gsreloc/rng.hpp"
#include "gsreloc/se3.hpp"

namespace gsreloc {

// Minimum per-axis splat extent; keeps alpha evaluation and Jacobians finite.
constexpr double kScaleFloor = 1e-3;

// A spatial point carrying a feature vector that decodes into O child
// Gaussian primitives at fixed local offsets.
struct Anchor {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::VectorXd feature;                               // F entries
  Eigen::Matrix<double, Eigen::Dynamic, 3> offsets;      // O x 3, meters
};

// Linear maps from anchor feature to per-offset opacity/scale/color logits.
// Fixed at scene creation.
struct LinearDecoder {
  int feature_dim = 0;
  int offsets_per_anchor = 0;
  Eigen::MatrixXd w_opacity;  // O x F
  Eigen::MatrixXd w_scale;    // 3O x F (rows grouped per offset)
  Eigen::MatrixXd w_color;    // 3O x F

  bool dims_consistent() const {
    return w_opacity.rows() == offsets_per_anchor && w_opacity.cols() == feature_dim &&
           w_scale.rows() == 3 * offsets_per_anchor && w_scale.cols() == feature_dim &&
           w_color.rows() == 3 * offsets_per_anchor && w_color.cols() == feature_dim;
  }
};

struct GaussianPrimitive {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();   // meters, world frame
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();  // per-axis stddev, meters
  double opacity = 0.0;                             // [0, 1]
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // RGB in [0,1]
  int parent_anchor = -1;
  int parent_offset = -1;
};

struct TrainingView {
  Pose pose;
  CameraIntrinsics intrinsics;
};

struct GaussianScene {
  std::vector<Anchor> anchors;
  LinearDecoder decoder;
  std::vector<GaussianPrimitive> gaussians;  // decode cache, A*O entries
  std::vector<TrainingView> training_views;

  int feature_dim() const { return decoder.feature_dim; }
  int offsets_per_anchor() const { return decoder.offsets_per_anchor; }
  int gaussian_count() const { return static_cast<int>(gaussians.size()); }
};

// g = D(phi): mean = position + offset; opacity/color sigmoid, scale softplus
// plus the scale floor. Pure and deterministic.
std::vector<GaussianPrimitive> decode(const std::vector<Anchor>& anchors,
                                      const LinearDecoder& decoder);

enum class SceneLayout { kRoom, kFacade };

struct SceneConfig {
  SceneLayout layout = SceneLayout::kRoom;
  int anchor_count = 500;
  int feature_dim = 8;
  int offsets_per_anchor = 4;
  Eigen::Vector3d extent = Eigen::Vector3d(4.0, 4.0, 2.5);  // room dims, meters
  double clutter_fraction = 0.1;        // anchors scattered in the interior
  double offset_scale = 0.05;           // local offset magnitude, meters
  int training_view_count = 24;
  double view_ring_radius = 1.0;        // camera ring radius, meters
  int image_width = 512;
  int image_height = 384;
  double fov_deg = 70.0;

  // Facade layout: two parallel populated planes, views on both sides.
  double facade_separation = 0.4;
  double facade_view_distance = 2.5;

  // Room layout: optional vertical partition fins on the walls create
  // occlusion pockets (small lateral convergence basins).
  int partition_count = 0;
  double partition_depth = 0.3;
};

GaussianScene generate_synthetic_scene(const SceneConfig& config, Rng& rng);

CameraIntrinsics intrinsics_from_fov(int width, int height, double fov_deg);

// Scene file: single JSON document {version, decoder, anchors[],
// training_views[]}; gaussians are re-decoded on load.
void save_scene(const GaussianScene& scene, const std::string& path);
GaussianScene load_scene(const std::string& path);

// Serialize/parse without touching the filesystem (also used for hashing).
std::string scene_to_json(const GaussianScene& scene);
GaussianScene scene_from_json(const std::string& text);

}  // namespace gsreloc
