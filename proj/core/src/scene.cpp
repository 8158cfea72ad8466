#include "gsreloc/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gsreloc {

using json = nlohmann::ordered_json;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) {
  // Overflow-safe: softplus(x) = max(x, 0) + log1p(exp(-|x|)).
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.size();
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const auto cols = j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (row.size() != cols) throw ParseError("ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row.at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

json pose_to_json(const Pose& p) {
  json out = json::array();
  for (double x : p.to_array()) out.push_back(x);
  return out;
}

Pose pose_from_json(const json& j) {
  if (j.size() != 7) throw ParseError("pose must have 7 entries");
  std::array<double, 7> a;
  for (int i = 0; i < 7; ++i) a[i] = j.at(i).get<double>();
  return Pose::from_array(a);
}

LinearDecoder random_decoder(int feature_dim, int offsets_per_anchor, Rng& rng) {
  LinearDecoder d;
  d.feature_dim = feature_dim;
  d.offsets_per_anchor = offsets_per_anchor;
  d.w_opacity.resize(offsets_per_anchor, feature_dim);
  d.w_scale.resize(3 * offsets_per_anchor, feature_dim);
  d.w_color.resize(3 * offsets_per_anchor, feature_dim);
  const double spread = 0.5 / std::sqrt(static_cast<double>(std::max(feature_dim - 1, 1)));
  // Column 0 multiplies the quasi-bias feature component (~1), which centers
  // the decoded distributions: opacity ~0.8, scale a few cm, colors mid-range.
  for (int o = 0; o < offsets_per_anchor; ++o) {
    for (int f = 0; f < feature_dim; ++f)
      d.w_opacity(o, f) = (f == 0) ? rng.normal(1.5, 0.3) : rng.normal(0.0, spread);
  }
  for (int r = 0; r < 3 * offsets_per_anchor; ++r) {
    for (int f = 0; f < feature_dim; ++f)
      d.w_scale(r, f) = (f == 0) ? rng.normal(-3.1, 0.2) : rng.normal(0.0, 0.5 * spread);
  }
  for (int r = 0; r < 3 * offsets_per_anchor; ++r) {
    for (int f = 0; f < feature_dim; ++f)
      d.w_color(r, f) = (f == 0) ? rng.normal(0.0, 0.6) : rng.normal(0.0, 1.6 * spread);
  }
  return d;
}

Eigen::VectorXd random_feature(int feature_dim, Rng& rng) {
  Eigen::VectorXd f(feature_dim);
  f(0) = rng.normal(1.0, 0.05);
  for (int i = 1; i < feature_dim; ++i) f(i) = rng.normal(0.0, 1.0);
  return f;
}

}  // namespace

std::vector<GaussianPrimitive> decode(const std::vector<Anchor>& anchors,
                                      const LinearDecoder& decoder) {
  if (!decoder.dims_consistent()) throw DimensionMismatch("decoder weights");
  const int F = decoder.feature_dim;
  const int O = decoder.offsets_per_anchor;
  std::vector<GaussianPrimitive> out;
  out.reserve(anchors.size() * static_cast<std::size_t>(O));
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const Anchor& anchor = anchors[a];
    if (anchor.feature.size() != F) throw DimensionMismatch("anchor feature");
    if (anchor.offsets.rows() != O) throw DimensionMismatch("anchor offsets");
    const Eigen::VectorXd op_logits = decoder.w_opacity * anchor.feature;
    const Eigen::VectorXd scale_logits = decoder.w_scale * anchor.feature;
    const Eigen::VectorXd color_logits = decoder.w_color * anchor.feature;
    for (int o = 0; o < O; ++o) {
      GaussianPrimitive g;
      g.mean = anchor.position + anchor.offsets.row(o).transpose();
      g.opacity = sigmoid(op_logits(o));
      for (int c = 0; c < 3; ++c) {
        g.scale(c) = softplus(scale_logits(3 * o + c)) + kScaleFloor;
        g.color(c) = sigmoid(color_logits(3 * o + c));
      }
      g.parent_anchor = static_cast<int>(a);
      g.parent_offset = o;
      out.push_back(g);
    }
  }
  return out;
}

CameraIntrinsics intrinsics_from_fov(int width, int height, double fov_deg) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  const double f = 0.5 * width / std::tan(0.5 * fov_deg * 3.14159265358979323846 / 180.0);
  k.fx = f;
  k.fy = f;
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  return k;
}

GaussianScene generate_synthetic_scene(const SceneConfig& config, Rng& rng) {
  if (config.anchor_count <= 0 || config.feature_dim <= 0 ||
      config.offsets_per_anchor <= 0 || config.training_view_count <= 0)
    throw InvalidConfig("counts must be positive");
  if (config.extent.minCoeff() <= 0.0) throw InvalidConfig("extent must be positive");
  if (config.clutter_fraction < 0.0 || config.clutter_fraction >= 1.0)
    throw InvalidConfig("clutter_fraction in [0,1)");

  GaussianScene scene;
  scene.decoder = random_decoder(config.feature_dim, config.offsets_per_anchor, rng);
  const Eigen::Vector3d half = 0.5 * config.extent;

  const int clutter = static_cast<int>(std::lround(config.anchor_count * config.clutter_fraction));
  const int surface = config.anchor_count - clutter;

  if (config.layout == SceneLayout::kRoom) {
    // Wall areas (pairs): x-faces, y-faces, z-faces.
    const double area_x = config.extent.y() * config.extent.z();
    const double area_y = config.extent.x() * config.extent.z();
    const double area_z = config.extent.x() * config.extent.y();
    const double total = 2.0 * (area_x + area_y + area_z);
    int fin_anchors = 0;
    if (config.partition_count > 0) fin_anchors = surface * 2 / 5;
    for (int i = 0; i < surface - fin_anchors; ++i) {
      const double pick = rng.uniform(0.0, total);
      Eigen::Vector3d p;
      const double s = (rng.uniform() < 0.5) ? -1.0 : 1.0;
      if (pick < 2.0 * area_x) {
        p = {s * half.x(), rng.uniform(-half.y(), half.y()), rng.uniform(-half.z(), half.z())};
      } else if (pick < 2.0 * (area_x + area_y)) {
        p = {rng.uniform(-half.x(), half.x()), s * half.y(), rng.uniform(-half.z(), half.z())};
      } else {
        p = {rng.uniform(-half.x(), half.x()), rng.uniform(-half.y(), half.y()), s * half.z()};
      }
      Anchor a;
      a.position = p;
      scene.anchors.push_back(std::move(a));
    }
    // Partition fins on the +y wall: planes x = x_k spanning the fin depth.
    for (int i = 0; i < fin_anchors; ++i) {
      const int k = rng.uniform_int(config.partition_count);
      const double x_k = -half.x() + (k + 0.5) * config.extent.x() / config.partition_count;
      Anchor a;
      a.position = {x_k, rng.uniform(half.y() - config.partition_depth, half.y()),
                    rng.uniform(-half.z(), half.z())};
      scene.anchors.push_back(std::move(a));
    }
    for (int i = 0; i < clutter; ++i) {
      Anchor a;
      a.position = {rng.uniform(-half.x(), half.x()), rng.uniform(-half.y(), half.y()),
                    rng.uniform(-half.z(), half.z())};
      scene.anchors.push_back(std::move(a));
    }
  } else {
    // Two-sided facade: populated planes at y = +/- separation/2.
    const double sep = config.facade_separation;
    if (sep <= 0.0) throw InvalidConfig("facade_separation must be positive");
    for (int i = 0; i < surface; ++i) {
      const double side = (i % 2 == 0) ? 1.0 : -1.0;
      Anchor a;
      a.position = {rng.uniform(-half.x(), half.x()), side * 0.5 * sep,
                    rng.uniform(-half.z(), half.z())};
      scene.anchors.push_back(std::move(a));
    }
    for (int i = 0; i < clutter; ++i) {
      Anchor a;
      a.position = {rng.uniform(-half.x(), half.x()),
                    rng.uniform(-0.5 * sep, 0.5 * sep),
                    rng.uniform(-half.z(), half.z())};
      scene.anchors.push_back(std::move(a));
    }
  }

  for (Anchor& a : scene.anchors) {
    a.feature = random_feature(config.feature_dim, rng);
    a.offsets.resize(config.offsets_per_anchor, 3);
    for (int o = 0; o < config.offsets_per_anchor; ++o)
      a.offsets.row(o) = rng.uniform_in_cube(config.offset_scale).transpose();
  }

  const CameraIntrinsics k =
      intrinsics_from_fov(config.image_width, config.image_height, config.fov_deg);
  if (config.layout == SceneLayout::kRoom) {
    // Inward-facing ring: each camera looks through the center at the far wall.
    for (int i = 0; i < config.training_view_count; ++i) {
      const double theta = 2.0 * 3.14159265358979323846 * i / config.training_view_count;
      const double r = config.view_ring_radius;
      const Eigen::Vector3d pos(r * std::cos(theta), r * std::sin(theta), 0.0);
      const double pitch = (i % 2 == 0) ? 0.25 : -0.25;  // alternate up/down
      const Eigen::Vector3d target = -pos + Eigen::Vector3d(0, 0, pitch);
      scene.training_views.push_back({make_look_at(pos, target), k});
    }
  } else {
    // Arcs on both sides of the facade.
    const int per_side = std::max(1, config.training_view_count / 2);
    for (int side = 0; side < 2; ++side) {
      const double sy = (side == 0) ? 1.0 : -1.0;
      const int n = (side == 0) ? per_side : config.training_view_count - per_side;
      for (int i = 0; i < n; ++i) {
        const double frac = (n == 1) ? 0.5 : static_cast<double>(i) / (n - 1);
        const double x = (frac - 0.5) * 1.2 * half.x();
        const Eigen::Vector3d pos(x, sy * config.facade_view_distance,
                                  rng.uniform(-0.2, 0.2));
        const Eigen::Vector3d target(0.7 * x, 0.0, 0.0);
        scene.training_views.push_back({make_look_at(pos, target), k});
      }
    }
  }

  scene.gaussians = decode(scene.anchors, scene.decoder);
  return scene;
}

std::string scene_to_json(const GaussianScene& scene) {
  json j;
  j["version"] = 1;
  json dec;
  dec["feature_dim"] = scene.decoder.feature_dim;
  dec["offsets_per_anchor"] = scene.decoder.offsets_per_anchor;
  dec["w_opacity"] = matrix_to_json(scene.decoder.w_opacity);
  dec["w_scale"] = matrix_to_json(scene.decoder.w_scale);
  dec["w_color"] = matrix_to_json(scene.decoder.w_color);
  j["decoder"] = std::move(dec);
  json anchors = json::array();
  for (const Anchor& a : scene.anchors) {
    json ja;
    ja["position"] = {a.position.x(), a.position.y(), a.position.z()};
    ja["feature"] = vector_to_json(a.feature);
    ja["offsets"] = matrix_to_json(a.offsets);
    anchors.push_back(std::move(ja));
  }
  j["anchors"] = std::move(anchors);
  json views = json::array();
  for (const TrainingView& v : scene.training_views) {
    json jv;
    jv["pose"] = pose_to_json(v.pose);
    const CameraIntrinsics& k = v.intrinsics;
    jv["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                        {"width", k.width}, {"height", k.height}};
    views.push_back(std::move(jv));
  }
  j["training_views"] = std::move(views);
  return j.dump(2);
}

GaussianScene scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  try {
    if (!j.contains("version")) throw ParseError("missing version");
    if (j.at("version").get<int>() != 1)
      throw SchemaVersionMismatch("unsupported scene version");
    GaussianScene scene;
    const json& dec = j.at("decoder");
    scene.decoder.feature_dim = dec.at("feature_dim").get<int>();
    scene.decoder.offsets_per_anchor = dec.at("offsets_per_anchor").get<int>();
    scene.decoder.w_opacity = matrix_from_json(dec.at("w_opacity"));
    scene.decoder.w_scale = matrix_from_json(dec.at("w_scale"));
    scene.decoder.w_color = matrix_from_json(dec.at("w_color"));
    if (!scene.decoder.dims_consistent()) throw ParseError("decoder dims inconsistent");
    for (const json& ja : j.at("anchors")) {
      Anchor a;
      const json& p = ja.at("position");
      a.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
      a.feature = vector_from_json(ja.at("feature"));
      a.offsets = matrix_from_json(ja.at("offsets"));
      if (a.offsets.cols() != 3) throw ParseError("offsets must be Ox3");
      scene.anchors.push_back(std::move(a));
    }
    for (const json& jv : j.at("training_views")) {
      TrainingView v;
      v.pose = pose_from_json(jv.at("pose"));
      const json& k = jv.at("intrinsics");
      v.intrinsics.fx = k.at("fx").get<double>();
      v.intrinsics.fy = k.at("fy").get<double>();
      v.intrinsics.cx = k.at("cx").get<double>();
      v.intrinsics.cy = k.at("cy").get<double>();
      v.intrinsics.width = k.at("width").get<int>();
      v.intrinsics.height = k.at("height").get<int>();
      scene.training_views.push_back(std::move(v));
    }
    scene.gaussians = decode(scene.anchors, scene.decoder);
    return scene;
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

void save_scene(const GaussianScene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << scene_to_json(scene);
  if (!out) throw IoError("write failed: " + path);
}

GaussianScene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

}  // namespace gsreloc
