#pragma once

// Parametric seed knots and a deterministic perturbation operator.

#include "knotpersist/geometry.hpp"
#include "knotpersist/knotid.hpp"

#include <cstdint>
#include <numeric>
#include <random>

namespace knotpersist {

/// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

/// Uniform double in [0, 1) from raw engine bits (stdlib-independent).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Vec3 uniform_in_ball(std::mt19937_64& rng) {
  for (;;) {
    Vec3 v(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
    if (v.squaredNorm() <= 1.0) return v;
  }
}

inline Vec3 uniform_on_sphere(std::mt19937_64& rng) {
  for (;;) {
    Vec3 v = uniform_in_ball(rng);
    const double r = v.norm();
    if (r > 1e-3) return v / r;
  }
}

/// Regular n-gon in the xy-plane with the given circumradius.
inline PolygonalKnot regular_polygon(std::size_t n, double circumradius = 1.0) {
  if (n < 3) throw ValidationError("regular polygon needs n >= 3");
  std::vector<Vec3> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    v[k] = Vec3(circumradius * std::cos(a), circumradius * std::sin(a), 0.0);
  }
  return PolygonalKnot(std::move(v));
}

/// (p, q) torus knot sampled at n equally spaced parameters on a torus with
/// major radius R and minor radius r. (2, 3) is a left-handed trefoil;
/// mirrored() gives the right-handed one.
inline PolygonalKnot torus_knot(int p, int q, std::size_t n, double major = 2.0, double minor = 1.0) {
  if (p < 1 || q < 1 || std::gcd(p, q) != 1) {
    throw ValidationError("torus knot needs positive coprime p, q");
  }
  if (n < 3) throw ValidationError("torus knot needs n >= 3");
  std::vector<Vec3> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    const double rho = major + minor * std::cos(q * t);
    v[k] = Vec3(rho * std::cos(p * t), rho * std::sin(p * t), minor * std::sin(q * t));
  }
  PolygonalKnot k(std::move(v));
  if (!is_embedded(k).embedded) throw ValidationError("torus knot sampling is not embedded; raise n");
  return k;
}

/// Figure-eight knot, x = (2 + cos 2t) cos 3t, y = (2 + cos 2t) sin 3t, z = sin 4t.
inline PolygonalKnot figure_eight(std::size_t n) {
  if (n < 3) throw ValidationError("figure-eight needs n >= 3");
  std::vector<Vec3> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    const double rho = 2.0 + std::cos(2.0 * t);
    v[k] = Vec3(rho * std::cos(3.0 * t), rho * std::sin(3.0 * t), std::sin(4.0 * t));
  }
  PolygonalKnot k(std::move(v));
  if (!is_embedded(k).embedded) throw ValidationError("figure-eight sampling is not embedded; raise n");
  return k;
}

inline constexpr int kPerturbAttempts = 100;

/// Displace every vertex by a uniform vector of norm <= eps. Retries until
/// the result is embedded with the input's determinant; throws after
/// kPerturbAttempts failures.
inline PolygonalKnot perturb(const PolygonalKnot& p, double eps, std::mt19937_64& rng) {
  const std::uint64_t det = knot_determinant(p);
  for (int attempt = 0; attempt < kPerturbAttempts; ++attempt) {
    std::vector<Vec3> v(p.vertices().begin(), p.vertices().end());
    for (auto& x : v) x += eps * uniform_in_ball(rng);
    try {
      PolygonalKnot out(std::move(v));
      if (is_embedded(out).embedded && knot_determinant(out) == det) return out;
    } catch (const GeometryError&) {
    }
  }
  throw ValidationError("perturbation failed to stay embedded after " +
                        std::to_string(kPerturbAttempts) + " attempts");
}

inline PolygonalKnot perturb(const PolygonalKnot& p, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return perturb(p, eps, rng);
}

}  // namespace knotpersist
