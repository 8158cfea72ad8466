#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace gsreloc {

// splitmix64 finalizer; used to mix seed material for derived streams.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic RNG with explicitly pinned real/int mappings so that streams
// are bit-reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent stream from a base seed and a path of indices
  // (e.g. {query_id, iteration, particle_slot}).
  static Rng derive(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(base);
    for (std::uint64_t v : path) h = mix64(h ^ mix64(v));
    return Rng(h);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); rejection sampling keeps the mapping exact.
  int uniform_int(int n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  // Box-Muller; two draws per call, no cached state.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  Eigen::Vector3d uniform_in_cube(double half_extent) {
    // Fixed component order.
    const double x = uniform(-half_extent, half_extent);
    const double y = uniform(-half_extent, half_extent);
    const double z = uniform(-half_extent, half_extent);
    return {x, y, z};
  }

  // Uniform direction on the unit sphere.
  Eigen::Vector3d uniform_unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 6.283185307179586476925286766559);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gsreloc
