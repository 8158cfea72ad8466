#include <doctest.h>

#include <cstring>

#include "gsreloc/renderer.hpp"
#include "gsreloc/rng.hpp"

using namespace gsreloc;

namespace {

CameraIntrinsics centered_camera(int w = 64, int h = 64, double f = 50.0) {
  CameraIntrinsics k;
  k.fx = f;
  k.fy = f;
  k.cx = w / 2;
  k.cy = h / 2;
  k.width = w;
  k.height = h;
  return k;
}

GaussianPrimitive axis_gaussian(double depth, double opacity, double scale) {
  GaussianPrimitive g;
  g.mean = {0.0, 0.0, depth};
  g.scale = {scale, scale, scale};
  g.opacity = opacity;
  g.color = {0.8, 0.4, 0.2};
  g.parent_anchor = 0;
  g.parent_offset = 0;
  return g;
}

std::vector<GaussianPrimitive> random_primitives(int n, Rng& rng) {
  std::vector<GaussianPrimitive> out;
  for (int i = 0; i < n; ++i) {
    GaussianPrimitive g;
    g.mean = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(1.0, 4.0)};
    const double s = rng.uniform(0.02, 0.15);
    g.scale = {s, s * rng.uniform(0.5, 1.5), s * rng.uniform(0.5, 1.5)};
    g.opacity = rng.uniform(0.1, 0.95);
    g.color = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    g.parent_anchor = i;
    g.parent_offset = 0;
    out.push_back(g);
  }
  return out;
}

}  // namespace

TEST_CASE("single-term uncertainty: U = tr * d * alpha at the footprint center") {
  const CameraIntrinsics k = centered_camera();
  const GaussianPrimitive g = axis_gaussian(2.0, 0.95, 0.2);
  const std::vector<double> traces = {3.0};
  const RenderBuffers buffers =
      render_primitives(std::vector<GaussianPrimitive>{g}, Pose::identity(), k, &traces);
  const int cx = static_cast<int>(k.cx);
  const int cy = static_cast<int>(k.cy);
  const double alpha = 0.95;  // exp(0) at the exact center
  CHECK(std::abs(buffers.uncertainty.at(cx, cy) - 3.0 * 2.0 * alpha) < 1e-6);
  CHECK(std::abs(buffers.depth.at(cx, cy) - 2.0) < 1e-6);
  CHECK(std::abs(buffers.accumulated_alpha.at(cx, cy) - alpha) < 1e-9);
}

TEST_CASE("all-zero opacities render empty buffers") {
  const CameraIntrinsics k = centered_camera();
  std::vector<GaussianPrimitive> gs = {axis_gaussian(1.0, 0.0, 0.3),
                                       axis_gaussian(2.0, 0.0, 0.3)};
  const std::vector<double> traces = {1.0, 1.0};
  const RenderBuffers buffers = render_primitives(gs, Pose::identity(), k, &traces);
  for (double v : buffers.depth.data) CHECK(v == 0.0);
  for (double v : buffers.uncertainty.data) CHECK(v == 0.0);
  for (double v : buffers.accumulated_alpha.data) CHECK(v == 0.0);
}

TEST_CASE("two-term compositing matches the hand-derived values") {
  const CameraIntrinsics k = centered_camera();
  // Huge footprints so the center alpha is exactly the opacity.
  std::vector<GaussianPrimitive> gs = {axis_gaussian(1.0, 0.5, 50.0),
                                       axis_gaussian(2.0, 0.5, 100.0)};
  const std::vector<double> traces = {3.0, 5.0};
  const RenderBuffers buffers = render_primitives(gs, Pose::identity(), k, &traces);
  const int cx = static_cast<int>(k.cx);
  const int cy = static_cast<int>(k.cy);
  // depth = (1*0.5 + 2*0.25) / 0.75 = 4/3
  CHECK(std::abs(buffers.depth.at(cx, cy) - 4.0 / 3.0) < 1e-9);
  // U = (tr1*d1*a1*T1 + tr2*d2*a2*T2)/N, T2 = 0.5
  const double expected_u = (3.0 * 1.0 * 0.5 + 5.0 * 2.0 * 0.5 * 0.5) / 2.0;
  CHECK(std::abs(buffers.uncertainty.at(cx, cy) - expected_u) < 1e-9);
}

TEST_CASE("render_depth_only equals the full render's depth channel") {
  Rng rng(21);
  const CameraIntrinsics k = centered_camera(96, 72, 60.0);
  const std::vector<GaussianPrimitive> gs = random_primitives(30, rng);
  GaussianScene scene;
  scene.gaussians = gs;
  const RenderBuffers full = render_primitives(gs, Pose::identity(), k);
  const ImageBuffer depth = render_depth_only(scene, Pose::identity(), k);
  REQUIRE(depth.data.size() == full.depth.data.size());
  CHECK(std::memcmp(depth.data.data(), full.depth.data.data(),
                    depth.data.size() * sizeof(double)) == 0);
}

TEST_CASE("single splat depth follows the camera") {
  const CameraIntrinsics k = centered_camera(128, 128, 80.0);
  const GaussianPrimitive g = axis_gaussian(2.0, 0.9, 0.15);
  const Pose cam(Eigen::Quaterniond::Identity(), {0.5, 0.0, 0.0});
  const RenderBuffers buffers =
      render_primitives(std::vector<GaussianPrimitive>{g}, cam, k);
  // Camera-frame depth is still 2; the footprint center shifts to
  // fx * (-0.5) / 2 + cx.
  const int px = static_cast<int>(std::lround(80.0 * -0.25 + k.cx));
  const int py = static_cast<int>(k.cy);
  CHECK(buffers.accumulated_alpha.at(px, py) > 0.1);
  CHECK(std::abs(buffers.depth.at(px, py) - 2.0) < 1e-6);
}

TEST_CASE("transmittance telescoping: accumulated alpha stays in [0,1]") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const CameraIntrinsics k = centered_camera(48, 48, 40.0);
    const std::vector<GaussianPrimitive> gs = random_primitives(40, rng);
    const RenderBuffers buffers = render_primitives(gs, Pose::identity(), k);
    for (double v : buffers.accumulated_alpha.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
    for (double v : buffers.depth.data) CHECK(v >= 0.0);
  }
}

TEST_CASE("uncertainty scales exactly with the traces") {
  Rng rng(41);
  const CameraIntrinsics k = centered_camera(48, 48, 40.0);
  const std::vector<GaussianPrimitive> gs = random_primitives(25, rng);
  std::vector<double> traces(gs.size());
  for (double& t : traces) t = rng.uniform(0.0, 10.0);
  const RenderBuffers base = render_primitives(gs, Pose::identity(), k, &traces);
  std::vector<double> scaled = traces;
  for (double& t : scaled) t *= 2.0;  // power of two: bit-exact scaling
  const RenderBuffers twice = render_primitives(gs, Pose::identity(), k, &scaled);
  for (std::size_t i = 0; i < base.uncertainty.data.size(); ++i)
    CHECK(twice.uncertainty.data[i] == 2.0 * base.uncertainty.data[i]);
}

TEST_CASE("rendering is bit-deterministic") {
  Rng rng(51);
  const CameraIntrinsics k = centered_camera(64, 48, 45.0);
  const std::vector<GaussianPrimitive> gs = random_primitives(35, rng);
  std::vector<double> traces(gs.size(), 1.0);
  const RenderBuffers a = render_primitives(gs, Pose::identity(), k, &traces);
  const RenderBuffers b = render_primitives(gs, Pose::identity(), k, &traces);
  CHECK(std::memcmp(a.color.data.data(), b.color.data.data(),
                    a.color.data.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.depth.data.data(), b.depth.data.data(),
                    a.depth.data.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.uncertainty.data.data(), b.uncertainty.data.data(),
                    a.uncertainty.data.size() * sizeof(double)) == 0);
}

TEST_CASE("single gaussian depth at footprint center is its camera depth") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const CameraIntrinsics k = centered_camera(64, 64, 50.0);
    GaussianPrimitive g;
    g.mean = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(1.0, 5.0)};
    g.scale = {rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3)};
    g.opacity = rng.uniform(0.3, 0.99);
    g.color = {0.5, 0.5, 0.5};
    const RenderBuffers buffers =
        render_primitives(std::vector<GaussianPrimitive>{g}, Pose::identity(), k);
    const Projection proj = project(Pose::identity(), k, g.mean);
    const int px = static_cast<int>(std::lround(proj.pixel.x()));
    const int py = static_cast<int>(std::lround(proj.pixel.y()));
    if (px < 0 || px >= k.width || py < 0 || py >= k.height) continue;
    if (buffers.accumulated_alpha.at(px, py) < 1e-6) continue;
    CHECK(std::abs(buffers.depth.at(px, py) - proj.depth) < 1e-6);
  }
}

TEST_CASE("trace length mismatch") {
  const CameraIntrinsics k = centered_camera();
  std::vector<GaussianPrimitive> gs = {axis_gaussian(1.0, 0.5, 0.1)};
  std::vector<double> traces = {1.0, 2.0};
  CHECK_THROWS_AS(render_primitives(gs, Pose::identity(), k, &traces),
                  TraceLengthMismatch);
}

TEST_CASE("ssim: identical and constant images") {
  Rng rng(71);
  ImageBuffer img(64, 48, 3);
  for (double& v : img.data) v = rng.uniform(0.0, 1.0);
  CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));

  ImageBuffer c1(32, 32, 1);
  ImageBuffer c2(32, 32, 1);
  for (double& v : c1.data) v = 0.37;
  for (double& v : c2.data) v = 0.37;
  CHECK(ssim(c1, c2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ssim: constant images with different means (closed form)") {
  ImageBuffer a(32, 32, 1);
  ImageBuffer b(32, 32, 1);
  for (double& v : a.data) v = 0.9;
  for (double& v : b.data) v = 0.1;
  const double c1 = 0.01 * 0.01;
  const double expected = (2.0 * 0.9 * 0.1 + c1) / (0.81 + 0.01 + c1);
  const double value = ssim(a, b);
  CHECK(value == doctest::Approx(expected).epsilon(1e-9));
  CHECK(value < 0.5);
}

TEST_CASE("ssim: dimension mismatch and small-image fallback") {
  ImageBuffer a(8, 8, 1);
  ImageBuffer b(8, 8, 1);
  for (double& v : a.data) v = 0.5;
  for (double& v : b.data) v = 0.5;
  CHECK(ssim(a, b) == doctest::Approx(1.0));
  ImageBuffer c(9, 8, 1);
  CHECK_THROWS_AS(ssim(a, c), DimensionMismatch);
}
