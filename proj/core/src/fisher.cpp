#include "gsreloc/fisher.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <thread>

#include "gsreloc/image.hpp"

namespace gsreloc {

ParameterLayout::Description ParameterLayout::describe(int index) const {
  Description d;
  d.anchor = index / per_anchor();
  const int rem = index % per_anchor();
  if (rem < feature_dim) {
    d.is_feature = true;
    d.feature = rem;
  } else {
    d.is_feature = false;
    d.offset = (rem - feature_dim) / 3;
    d.coord = (rem - feature_dim) % 3;
  }
  return d;
}

namespace {

using SparseRow = std::vector<JacobianEntry>;

void sort_and_merge(SparseRow& row) {
  std::sort(row.begin(), row.end(),
            [](const JacobianEntry& a, const JacobianEntry& b) { return a.param < b.param; });
  SparseRow merged;
  merged.reserve(row.size());
  for (const JacobianEntry& e : row) {
    if (!merged.empty() && merged.back().param == e.param)
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  row = std::move(merged);
}

// Per-fragment quantities that do not depend on the pixel.
struct FragmentChain {
  const ProjectedGaussian* pg = nullptr;
  const GaussianPrimitive* prim = nullptr;
  int anchor = -1;
  int offset_row = -1;
  Eigen::Matrix<double, 2, 3> p_mat;        // J_proj * R_wc, d(center)/d(offset)
  Eigen::Matrix2d dcov_ddelta[3];           // d(cov2d)/d(offset coord)
  Eigen::Vector3d scale_sigmoid;            // softplus' recovered from scales
  Eigen::Vector3d color_deriv;              // c(1-c) per channel
  double opacity_deriv = 0.0;               // op(1-op)
};

FragmentChain make_chain(const ProjectedGaussian& pg, const GaussianPrimitive& prim,
                         const Eigen::Matrix3d& r_wc, const CameraIntrinsics& k) {
  FragmentChain fc;
  fc.pg = &pg;
  fc.prim = &prim;
  fc.anchor = prim.parent_anchor;
  fc.offset_row = prim.parent_offset;

  const Eigen::Vector3d& xc = pg.x_cam;
  const double z = xc.z();
  const double inv_z = 1.0 / z;
  const double inv_z2 = inv_z * inv_z;

  Eigen::Matrix<double, 2, 3> jproj;
  jproj << k.fx * inv_z, 0.0, -k.fx * xc.x() * inv_z2,
           0.0, k.fy * inv_z, -k.fy * xc.y() * inv_z2;
  fc.p_mat = jproj * r_wc;

  // dJ/dXcam_m for m in {x, y, z}.
  Eigen::Matrix<double, 2, 3> dj[3];
  dj[0].setZero();
  dj[0](0, 2) = -k.fx * inv_z2;
  dj[1].setZero();
  dj[1](1, 2) = -k.fy * inv_z2;
  dj[2].setZero();
  dj[2](0, 0) = -k.fx * inv_z2;
  dj[2](0, 2) = 2.0 * k.fx * xc.x() * inv_z2 * inv_z;
  dj[2](1, 1) = -k.fy * inv_z2;
  dj[2](1, 2) = 2.0 * k.fy * xc.y() * inv_z2 * inv_z;

  const Eigen::Matrix3d cov_world = prim.scale.array().square().matrix().asDiagonal();
  const Eigen::Matrix3d cov_cam = r_wc * cov_world * r_wc.transpose();

  // d(cov2d)/d(Xcam_m), then chained through dXcam/ddelta = R_wc.
  Eigen::Matrix2d dcov_dxcam[3];
  for (int m = 0; m < 3; ++m) {
    const Eigen::Matrix<double, 2, 3> a = dj[m] * cov_cam;
    dcov_dxcam[m] = a * jproj.transpose() + jproj * a.transpose();
  }
  for (int c = 0; c < 3; ++c) {
    fc.dcov_ddelta[c] = r_wc(0, c) * dcov_dxcam[0] + r_wc(1, c) * dcov_dxcam[1] +
                        r_wc(2, c) * dcov_dxcam[2];
  }

  // softplus'(z) = 1 - exp(-softplus(z)); softplus(z) = scale - floor.
  for (int c = 0; c < 3; ++c)
    fc.scale_sigmoid(c) = 1.0 - std::exp(-(prim.scale(c) - kScaleFloor));
  for (int c = 0; c < 3; ++c) fc.color_deriv(c) = prim.color(c) * (1.0 - prim.color(c));
  fc.opacity_deriv = prim.opacity * (1.0 - prim.opacity);
  return fc;
}

// Per (pixel, fragment) evaluation state from the forward pass.
struct FragmentAtPixel {
  int chain = -1;
  double alpha = 0.0;
  double transmittance = 1.0;  // before this fragment
  bool clamped = false;
  double gauss = 0.0;          // exp(-q/2)
  Eigen::Vector2d v;           // cov_inv * (p - center)
};

// Walks all requested pixels, building per-pixel sparse Jacobian rows and
// passing them to `sink(pixel_index, rows)`.
template <typename Sink>
void for_each_pixel_jacobian(const GaussianScene& scene, const TrainingView& view,
                             std::span<const PixelRef> pixels, Sink&& sink) {
  const CameraIntrinsics& k = view.intrinsics;
  const Eigen::Matrix3d r_wc = view.pose.rotation_matrix().transpose();
  const std::vector<ProjectedGaussian> projected =
      project_gaussians(scene.gaussians, view.pose, k);

  // Fragment lists per requested pixel, in depth order.
  std::vector<int> pixel_slot(static_cast<std::size_t>(k.width) * k.height, -1);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const PixelRef& p = pixels[i];
    if (p.x < 0 || p.x >= k.width || p.y < 0 || p.y >= k.height)
      throw InvalidConfig("pixel outside image");
    pixel_slot[static_cast<std::size_t>(p.y) * k.width + p.x] = static_cast<int>(i);
  }
  std::vector<std::vector<int>> frags_per_pixel(pixels.size());
  std::vector<FragmentChain> chains(projected.size());
  for (std::size_t f = 0; f < projected.size(); ++f) {
    const ProjectedGaussian& pg = projected[f];
    chains[f] = make_chain(pg, scene.gaussians[pg.index], r_wc, k);
    for (int y = pg.y_min; y <= pg.y_max; ++y)
      for (int x = pg.x_min; x <= pg.x_max; ++x) {
        const int slot = pixel_slot[static_cast<std::size_t>(y) * k.width + x];
        if (slot >= 0) frags_per_pixel[slot].push_back(static_cast<int>(f));
      }
  }

  const int fdim = scene.feature_dim();
  const ParameterLayout layout = ParameterLayout::for_scene(scene);
  std::vector<FragmentAtPixel> active;
  std::array<SparseRow, 3> rows;

  for (std::size_t pi = 0; pi < pixels.size(); ++pi) {
    const PixelRef& p = pixels[pi];
    active.clear();
    for (auto& r : rows) r.clear();

    // Forward pass, mirroring render_primitives exactly.
    double t = 1.0;
    for (int f : frags_per_pixel[pi]) {
      if (t < kTransmittanceMin) break;
      const ProjectedGaussian& pg = projected[f];
      Eigen::Vector2d v;
      double gauss = 0.0;
      const double alpha = eval_alpha(pg, p.x, p.y, nullptr, &v, &gauss);
      if (alpha <= 0.0) continue;
      FragmentAtPixel fap;
      fap.chain = f;
      fap.alpha = alpha;
      fap.transmittance = t;
      fap.clamped = pg.opacity * gauss > kAlphaMax;
      fap.gauss = gauss;
      fap.v = v;
      active.push_back(fap);
      t *= (1.0 - alpha);
    }
    if (active.empty()) {
      sink(pi, rows);
      continue;
    }

    // Suffix sums S_ch(k) = sum_{i>k} c_i alpha_i T_i per channel.
    const std::size_t m = active.size();
    std::vector<Eigen::Vector3d> suffix(m + 1, Eigen::Vector3d::Zero());
    for (std::size_t i = m; i-- > 0;) {
      const FragmentAtPixel& fap = active[i];
      suffix[i] = suffix[i + 1] +
                  chains[fap.chain].pg->color * (fap.alpha * fap.transmittance);
    }

    for (std::size_t i = 0; i < m; ++i) {
      const FragmentAtPixel& fap = active[i];
      const FragmentChain& fc = chains[fap.chain];
      const double weight = fap.alpha * fap.transmittance;

      // dI_ch / d(alpha_i)
      Eigen::Vector3d didalpha =
          fc.pg->color * fap.transmittance - suffix[i + 1] / (1.0 - fap.alpha);

      Eigen::Vector3d dalpha_ddelta = Eigen::Vector3d::Zero();
      Eigen::VectorXd dalpha_dfeat = Eigen::VectorXd::Zero(fdim);
      if (!fap.clamped) {
        const Eigen::Vector2d dalpha_dmu = fap.alpha * fap.v;
        for (int c = 0; c < 3; ++c) {
          const double via_mu = dalpha_dmu.dot(fc.p_mat.col(c));
          const double via_cov = 0.5 * fap.alpha * fap.v.dot(fc.dcov_ddelta[c] * fap.v);
          dalpha_ddelta(c) = via_mu + via_cov;
        }
        // Through the decoder: opacity and scale paths.
        const double dalpha_dop = fap.gauss;
        dalpha_dfeat = (dalpha_dop * fc.opacity_deriv) *
                       scene.decoder.w_opacity.row(fc.offset_row).transpose();
        for (int s = 0; s < 3; ++s) {
          const Eigen::Vector2d u = fc.p_mat.col(s);
          const double vu = fap.v.dot(u);
          const double dalpha_dscale = fap.alpha * fc.prim->scale(s) * vu * vu;
          dalpha_dfeat += (dalpha_dscale * fc.scale_sigmoid(s)) *
                          scene.decoder.w_scale.row(3 * fc.offset_row + s).transpose();
        }
      }

      for (int ch = 0; ch < 3; ++ch) {
        SparseRow& row = rows[ch];
        if (!fap.clamped) {
          for (int c = 0; c < 3; ++c) {
            const double val = didalpha(ch) * dalpha_ddelta(c);
            if (val != 0.0)
              row.push_back({layout.offset_index(fc.anchor, fc.offset_row, c), val});
          }
        }
        // Feature entries: alpha paths plus the direct color path.
        const double color_factor = weight * fc.color_deriv(ch);
        for (int f = 0; f < fdim; ++f) {
          double val = color_factor * scene.decoder.w_color(3 * fc.offset_row + ch, f);
          if (!fap.clamped) val += didalpha(ch) * dalpha_dfeat(f);
          if (val != 0.0) row.push_back({layout.feature_index(fc.anchor, f), val});
        }
      }
    }
    for (auto& r : rows) sort_and_merge(r);
    sink(pi, rows);
  }
}

}  // namespace

std::vector<PixelJacobian> render_jacobian(const GaussianScene& scene,
                                           const TrainingView& view,
                                           std::span<const PixelRef> pixels) {
  if (pixels.empty()) throw InvalidConfig("pixel subset must be non-empty");
  std::vector<PixelJacobian> out(pixels.size());
  for_each_pixel_jacobian(scene, view, pixels,
                          [&](std::size_t pi, const std::array<SparseRow, 3>& rows) {
                            out[pi].pixel = pixels[pi];
                            out[pi].channels = rows;
                          });
  return out;
}

DiagonalFisher fisher_diag(const GaussianScene& scene, const TrainingView& view,
                           double lambda, std::span<const PixelRef> pixels) {
  if (lambda < 0.0) throw InvalidConfig("lambda must be >= 0");
  const ParameterLayout layout = ParameterLayout::for_scene(scene);
  DiagonalFisher out;
  out.lambda = lambda;
  out.diag = Eigen::VectorXd::Zero(layout.size());
  for_each_pixel_jacobian(scene, view, pixels,
                          [&](std::size_t, const std::array<SparseRow, 3>& rows) {
                            for (const SparseRow& row : rows)
                              for (const JacobianEntry& e : row)
                                out.diag(e.param) += e.value * e.value;
                          });
  out.diag.array() += lambda;
  return out;
}

GlobalFisher accumulate(std::span<const DiagonalFisher> views) {
  if (views.empty()) throw EmptyViewList();
  GlobalFisher g;
  g.diag = Eigen::VectorXd::Zero(views[0].diag.size());
  for (const DiagonalFisher& v : views) {
    if (v.diag.size() != g.diag.size()) throw DimensionMismatch("fisher diagonals");
    g.diag += v.diag;
  }
  g.view_count = static_cast<int>(views.size());
  return g;
}

GlobalFisher compute_global_fisher(const GaussianScene& scene,
                                   std::span<const TrainingView> views,
                                   const FisherOptions& options) {
  if (views.empty()) throw EmptyViewList();
  std::vector<DiagonalFisher> per_view(views.size());
  const int threads = std::max(1, options.threads);
  if (threads == 1 || views.size() == 1) {
    for (std::size_t i = 0; i < views.size(); ++i) {
      const auto pixels = strided_pixel_grid(views[i].intrinsics, options.pixel_stride);
      per_view[i] = fisher_diag(scene, views[i], options.lambda, pixels);
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= views.size()) return;
        const auto pixels = strided_pixel_grid(views[i].intrinsics, options.pixel_stride);
        per_view[i] = fisher_diag(scene, views[i], options.lambda, pixels);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  // Reduction in view order keeps the sum deterministic across thread counts.
  return accumulate(per_view);
}

PerGaussianTrace per_gaussian_trace(const GlobalFisher& global, const GaussianScene& scene) {
  const ParameterLayout layout = ParameterLayout::for_scene(scene);
  if (global.diag.size() != layout.size()) throw IndexMapMismatch();
  PerGaussianTrace traces(scene.gaussians.size(), 0.0);
  // Feature-block sums shared by each anchor's children.
  std::vector<double> feature_block(scene.anchors.size(), 0.0);
  for (std::size_t a = 0; a < scene.anchors.size(); ++a) {
    double acc = 0.0;
    for (int f = 0; f < layout.feature_dim; ++f)
      acc += global.diag(layout.feature_index(static_cast<int>(a), f));
    feature_block[a] = acc;
  }
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const GaussianPrimitive& g = scene.gaussians[i];
    double acc = feature_block[g.parent_anchor];
    for (int c = 0; c < 3; ++c)
      acc += global.diag(layout.offset_index(g.parent_anchor, g.parent_offset, c));
    traces[i] = acc;
  }
  return traces;
}

std::vector<PixelRef> strided_pixel_grid(const CameraIntrinsics& intrinsics, int stride) {
  if (stride < 1) throw InvalidConfig("stride must be >= 1");
  std::vector<PixelRef> out;
  for (int y = 0; y < intrinsics.height; y += stride)
    for (int x = 0; x < intrinsics.width; x += stride) out.push_back({x, y});
  return out;
}

void save_fisher_cache(const GlobalFisher& global, const PerGaussianTrace& traces,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const char magic[4] = {'F', 'S', 'H', '1'};
  out.write(magic, 4);
  const std::uint32_t vc = static_cast<std::uint32_t>(global.view_count);
  const std::uint64_t dn = static_cast<std::uint64_t>(global.diag.size());
  const std::uint64_t tn = static_cast<std::uint64_t>(traces.size());
  out.write(reinterpret_cast<const char*>(&vc), sizeof(vc));
  out.write(reinterpret_cast<const char*>(&dn), sizeof(dn));
  out.write(reinterpret_cast<const char*>(&tn), sizeof(tn));
  out.write(reinterpret_cast<const char*>(global.diag.data()),
            static_cast<std::streamsize>(dn * sizeof(double)));
  out.write(reinterpret_cast<const char*>(traces.data()),
            static_cast<std::streamsize>(tn * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

bool load_fisher_cache(const std::string& path, GlobalFisher* global,
                       PerGaussianTrace* traces) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[4];
  in.read(magic, 4);
  if (!in || magic[0] != 'F' || magic[1] != 'S' || magic[2] != 'H' || magic[3] != '1')
    return false;
  std::uint32_t vc = 0;
  std::uint64_t dn = 0, tn = 0;
  in.read(reinterpret_cast<char*>(&vc), sizeof(vc));
  in.read(reinterpret_cast<char*>(&dn), sizeof(dn));
  in.read(reinterpret_cast<char*>(&tn), sizeof(tn));
  if (!in) return false;
  global->view_count = static_cast<int>(vc);
  global->diag.resize(static_cast<Eigen::Index>(dn));
  traces->resize(tn);
  in.read(reinterpret_cast<char*>(global->diag.data()),
          static_cast<std::streamsize>(dn * sizeof(double)));
  in.read(reinterpret_cast<char*>(traces->data()),
          static_cast<std::streamsize>(tn * sizeof(double)));
  return static_cast<bool>(in);
}

}  // namespace gsreloc
