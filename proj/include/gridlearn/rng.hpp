#pragma once

// Seeded, portable randomness. Every stochastic stage derives its engine from
// one master seed, so runs reproduce bit-for-bit across platforms. The engine
// is std::mt19937_64 (state evolution fixed by the standard); scalar
// transforms are implemented here because the <random> distributions are
// implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace gridlearn::rng {

using Engine = std::mt19937_64;

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Per-stage seed: stage name hashed into the master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  return splitmix64(master ^ fnv1a64(stage));
}

/// Uniform on [0, 1), 53-bit resolution, one engine call.
inline double uniform01(Engine& eng) { return (eng() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

/// Standard normal via Box-Muller. Exactly two engine calls per draw.
inline double normal01(Engine& eng) {
  const double u1 = ((eng() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = (eng() >> 11) * 0x1.0p-53;        // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Eigen::VectorXd normal_vector(Engine& eng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal01(eng);
  return v;
}

/// Uniform direction on the unit sphere in R^n (normalized Gaussian).
inline Eigen::VectorXd unit_sphere(Engine& eng, Eigen::Index n) {
  Eigen::VectorXd v = normal_vector(eng, n);
  double nrm = v.norm();
  while (nrm < 1e-12) {
    v = normal_vector(eng, n);
    nrm = v.norm();
  }
  return v / nrm;
}

}  // namespace gridlearn::rng
