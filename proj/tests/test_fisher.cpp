#include <doctest.h>

#include <cmath>
#include <map>

#include "gsreloc/fisher.hpp"
#include "test_util.hpp"

using namespace gsreloc;
using testutil::tiny_frontal_scene;

namespace {

GaussianScene with_param_shift(const GaussianScene& scene, int param, double h) {
  GaussianScene out = scene;
  const ParameterLayout layout = ParameterLayout::for_scene(scene);
  const ParameterLayout::Description d = layout.describe(param);
  if (d.is_feature)
    out.anchors[d.anchor].feature(d.feature) += h;
  else
    out.anchors[d.anchor].offsets(d.offset, d.coord) += h;
  out.gaussians = decode(out.anchors, out.decoder);
  return out;
}

double jacobian_entry(const PixelJacobian& row, int channel, int param) {
  for (const JacobianEntry& e : row.channels[channel])
    if (e.param == param) return e.value;
  return 0.0;
}

}  // namespace

TEST_CASE("parameter layout is a bijection") {
  ParameterLayout layout{5, 4, 3};
  CHECK(layout.size() == 5 * (4 + 9));
  std::map<int, int> seen;
  for (int a = 0; a < 5; ++a) {
    for (int f = 0; f < 4; ++f) {
      const int idx = layout.feature_index(a, f);
      CHECK(seen.insert({idx, 1}).second);
      const auto d = layout.describe(idx);
      CHECK(d.anchor == a);
      CHECK(d.is_feature);
      CHECK(d.feature == f);
    }
    for (int o = 0; o < 3; ++o)
      for (int c = 0; c < 3; ++c) {
        const int idx = layout.offset_index(a, o, c);
        CHECK(seen.insert({idx, 1}).second);
        const auto d = layout.describe(idx);
        CHECK(d.anchor == a);
        CHECK(!d.is_feature);
        CHECK(d.offset == o);
        CHECK(d.coord == c);
      }
  }
  CHECK(static_cast<int>(seen.size()) == layout.size());
}

TEST_CASE("fisher_diag is lambda everywhere when nothing is visible") {
  GaussianScene scene = tiny_frontal_scene(3, 4, 2, 7);
  // Face away from the anchors.
  TrainingView view = scene.training_views.front();
  view.pose = make_look_at({0, 0, 0}, {0, 0, -5});
  const auto pixels = strided_pixel_grid(view.intrinsics, 2);
  const DiagonalFisher diag = fisher_diag(scene, view, 1e-6, pixels);
  for (Eigen::Index i = 0; i < diag.diag.size(); ++i) CHECK(diag.diag(i) == 1e-6);
}

TEST_CASE("fisher_diag equals the dense JtJ diagonal from render_jacobian") {
  const GaussianScene scene = tiny_frontal_scene(4, 4, 2, 11);
  const TrainingView& view = scene.training_views.front();
  const auto pixels = strided_pixel_grid(view.intrinsics, 3);
  const double lambda = 1e-5;
  const DiagonalFisher diag = fisher_diag(scene, view, lambda, pixels);
  const auto rows = render_jacobian(scene, view, pixels);
  Eigen::VectorXd brute = Eigen::VectorXd::Zero(diag.diag.size());
  for (const PixelJacobian& row : rows)
    for (int ch = 0; ch < 3; ++ch)
      for (const JacobianEntry& e : row.channels[ch]) brute(e.param) += e.value * e.value;
  brute.array() += lambda;
  for (Eigen::Index i = 0; i < brute.size(); ++i)
    CHECK(diag.diag(i) == doctest::Approx(brute(i)).epsilon(1e-12));
}

TEST_CASE("analytic jacobian matches central finite differences") {
  const GaussianScene scene = tiny_frontal_scene(4, 4, 2, 13);
  const TrainingView& view = scene.training_views.front();
  const ParameterLayout layout = ParameterLayout::for_scene(scene);

  // Probe pixels near the projected gaussians, filtered for FD safety.
  const auto projected = project_gaussians(scene.gaussians, view.pose, view.intrinsics);
  std::vector<PixelRef> pixels;
  for (const ProjectedGaussian& g : projected) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = static_cast<int>(std::lround(g.center.x())) + 2 * dx;
        const int y = static_cast<int>(std::lround(g.center.y())) + 2 * dy;
        if (x < 0 || x >= view.intrinsics.width || y < 0 || y >= view.intrinsics.height)
          continue;
        if (!testutil::fd_safe_pixel(projected, x, y)) continue;
        pixels.push_back({x, y});
      }
  }
  REQUIRE(pixels.size() > 10);

  const auto rows = render_jacobian(scene, view, pixels);
  const double h = 1e-5;
  int checked = 0;
  for (int param = 0; param < layout.size(); ++param) {
    const GaussianScene plus = with_param_shift(scene, param, h);
    const GaussianScene minus = with_param_shift(scene, param, -h);
    const RenderBuffers bp =
        render_primitives(plus.gaussians, view.pose, view.intrinsics);
    const RenderBuffers bm =
        render_primitives(minus.gaussians, view.pose, view.intrinsics);
    for (std::size_t pi = 0; pi < pixels.size(); ++pi) {
      for (int ch = 0; ch < 3; ++ch) {
        const double fd = (bp.color.at(pixels[pi].x, pixels[pi].y, ch) -
                           bm.color.at(pixels[pi].x, pixels[pi].y, ch)) /
                          (2.0 * h);
        const double analytic = jacobian_entry(rows[pi], ch, param);
        const double tol = std::max(1e-8, 1e-3 * std::max(std::abs(fd), std::abs(analytic)));
        CHECK(std::abs(analytic - fd) <= tol);
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("unobserved gaussians carry exactly the regularization mass") {
  GaussianScene scene = tiny_frontal_scene(3, 4, 2, 17);
  TrainingView away = scene.training_views.front();
  away.pose = make_look_at({0, 0, 0}, {0, 0, -5});
  const double lambda = 1e-6;
  const auto pixels = strided_pixel_grid(away.intrinsics, 2);

  SUBCASE("single view") {
    const DiagonalFisher d = fisher_diag(scene, away, lambda, pixels);
    const GlobalFisher g = accumulate(std::vector<DiagonalFisher>{d});
    const PerGaussianTrace traces = per_gaussian_trace(g, scene);
    const double expected = lambda * (4 + 3);
    for (double t : traces) CHECK(t == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("two views accumulate lambda per view") {
    const DiagonalFisher d = fisher_diag(scene, away, lambda, pixels);
    const GlobalFisher g = accumulate(std::vector<DiagonalFisher>{d, d});
    const PerGaussianTrace traces = per_gaussian_trace(g, scene);
    for (double t : traces) CHECK(t == doctest::Approx(2.0 * lambda * 7).epsilon(1e-12));
  }
}

TEST_CASE("accumulate: identity, linearity, commutativity") {
  const GaussianScene scene = tiny_frontal_scene(3, 4, 2, 19);
  const TrainingView& view = scene.training_views.front();
  const auto pixels = strided_pixel_grid(view.intrinsics, 2);
  const DiagonalFisher d1 = fisher_diag(scene, view, 1e-6, pixels);
  TrainingView shifted = view;
  shifted.pose = Pose(Eigen::Quaterniond::Identity(), {0.1, 0.0, -0.2});
  const DiagonalFisher d2 = fisher_diag(scene, shifted, 1e-6, pixels);

  const GlobalFisher one = accumulate(std::vector<DiagonalFisher>{d1});
  CHECK(one.diag == d1.diag);
  CHECK(one.view_count == 1);

  const GlobalFisher twice = accumulate(std::vector<DiagonalFisher>{d1, d1});
  CHECK(twice.diag == (2.0 * d1.diag).eval());

  const GlobalFisher ab = accumulate(std::vector<DiagonalFisher>{d1, d2});
  const GlobalFisher ba = accumulate(std::vector<DiagonalFisher>{d2, d1});
  CHECK(ab.diag == ba.diag);

  CHECK_THROWS_AS(accumulate(std::vector<DiagonalFisher>{}), EmptyViewList);
}

TEST_CASE("per_gaussian_trace: uniform diagonal and block drops") {
  const GaussianScene scene = tiny_frontal_scene(3, 4, 2, 23);
  const ParameterLayout layout = ParameterLayout::for_scene(scene);

  GlobalFisher uniform;
  uniform.view_count = 1;
  uniform.diag = Eigen::VectorXd::Constant(layout.size(), 0.5);
  const PerGaussianTrace traces = per_gaussian_trace(uniform, scene);
  REQUIRE(traces.size() == scene.gaussians.size());
  for (double t : traces) CHECK(t == doctest::Approx(0.5 * (4 + 3)).epsilon(1e-12));

  // Zero out anchor 1's feature block: its children drop by the block sum.
  GlobalFisher dropped = uniform;
  double block = 0.0;
  for (int f = 0; f < 4; ++f) {
    block += dropped.diag(layout.feature_index(1, f));
    dropped.diag(layout.feature_index(1, f)) = 0.0;
  }
  const PerGaussianTrace traces2 = per_gaussian_trace(dropped, scene);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (scene.gaussians[i].parent_anchor == 1)
      CHECK(traces[i] - traces2[i] == doctest::Approx(block).epsilon(1e-12));
    else
      CHECK(traces2[i] == traces[i]);
    CHECK(traces2[i] >= 0.0);
  }

  GlobalFisher wrong;
  wrong.diag = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(per_gaussian_trace(wrong, scene), IndexMapMismatch);
}

TEST_CASE("jacobian locality: distant gaussians never share pixels") {
  GaussianScene scene = tiny_frontal_scene(2, 4, 1, 29);
  scene.anchors[0].position = {-0.45, 0.0, 2.0};
  scene.anchors[1].position = {0.45, 0.0, 2.0};
  scene.anchors[0].offsets.setZero();
  scene.anchors[1].offsets.setZero();
  scene.gaussians = decode(scene.anchors, scene.decoder);
  const TrainingView& view = scene.training_views.front();
  const ParameterLayout layout = ParameterLayout::for_scene(scene);
  const auto pixels = strided_pixel_grid(view.intrinsics, 1);
  const auto rows = render_jacobian(scene, view, pixels);
  for (const PixelJacobian& row : rows) {
    bool touches_a0 = false;
    bool touches_a1 = false;
    for (int ch = 0; ch < 3; ++ch)
      for (const JacobianEntry& e : row.channels[ch]) {
        const auto d = layout.describe(e.param);
        if (d.anchor == 0) touches_a0 = true;
        if (d.anchor == 1) touches_a1 = true;
      }
    CHECK(!(touches_a0 && touches_a1));
  }
}

TEST_CASE("zeroed decoder rows kill the corresponding feature entries") {
  GaussianScene scene = tiny_frontal_scene(2, 4, 1, 31);
  scene.decoder.w_opacity.setZero();
  scene.decoder.w_scale.setZero();
  scene.decoder.w_color.setZero();
  scene.gaussians = decode(scene.anchors, scene.decoder);
  const TrainingView& view = scene.training_views.front();
  const ParameterLayout layout = ParameterLayout::for_scene(scene);
  const auto pixels = strided_pixel_grid(view.intrinsics, 1);
  const auto rows = render_jacobian(scene, view, pixels);
  bool any_offset = false;
  for (const PixelJacobian& row : rows)
    for (int ch = 0; ch < 3; ++ch)
      for (const JacobianEntry& e : row.channels[ch]) {
        CHECK(!layout.describe(e.param).is_feature);
        any_offset = true;
      }
  CHECK(any_offset);  // geometry path stays live
}

TEST_CASE("compute_global_fisher is deterministic across thread counts") {
  const GaussianScene scene = tiny_frontal_scene(4, 4, 2, 37);
  std::vector<TrainingView> views;
  for (int i = 0; i < 4; ++i) {
    TrainingView v = scene.training_views.front();
    v.pose = Pose(Eigen::Quaterniond::Identity(),
                  {0.05 * i, -0.03 * i, -0.1 * i});
    views.push_back(v);
  }
  FisherOptions opt1;
  opt1.threads = 1;
  FisherOptions opt4;
  opt4.threads = 4;
  const GlobalFisher a = compute_global_fisher(scene, views, opt1);
  const GlobalFisher b = compute_global_fisher(scene, views, opt4);
  CHECK(a.diag == b.diag);
  CHECK(a.view_count == 4);
}

TEST_CASE("fisher cache round trip") {
  const GaussianScene scene = tiny_frontal_scene(3, 4, 2, 41);
  const GlobalFisher g =
      compute_global_fisher(scene, scene.training_views, FisherOptions{});
  const PerGaussianTrace traces = per_gaussian_trace(g, scene);
  const std::string path = "/tmp/gsreloc_test_fisher_cache.bin";
  save_fisher_cache(g, traces, path);
  GlobalFisher g2;
  PerGaussianTrace t2;
  REQUIRE(load_fisher_cache(path, &g2, &t2));
  CHECK(g2.view_count == g.view_count);
  CHECK(g2.diag == g.diag);
  CHECK(t2 == traces);
  std::remove(path.c_str());
}
