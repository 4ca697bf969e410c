#pragma once

// Thickness-1 normalization and the quotient by proper rigid motions and
// dihedral relabelings.

#include "knotpersist/geometry.hpp"
#include "knotpersist/knotid.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cstdint>
#include <vector>

namespace knotpersist {

/// Cheap invariants of a class. Only used to rule pairs out; equality is
/// always decided by alignment.
struct Fingerprint {
  std::vector<double> sorted_edge_lengths;
  double total_curvature = 0.0;
  std::uint64_t determinant = 1;
};

inline Fingerprint fingerprint(const PolygonalKnot& p) {
  Fingerprint f;
  f.sorted_edge_lengths.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) f.sorted_edge_lengths.push_back(p.edge(i).norm());
  std::sort(f.sorted_edge_lengths.begin(), f.sorted_edge_lengths.end());
  f.total_curvature = total_curvature(p);
  f.determinant = knot_determinant(p);
  return f;
}

/// A point of the thickness-1 configuration space.
struct NormalizedConfig {
  PolygonalKnot knot;
  double length = 0.0;
  double ropelength = 0.0;
  Fingerprint fingerprint;

  std::size_t size() const noexcept { return knot.size(); }
};

/// Dilate by 1/thickness so the result has thickness 1.
inline NormalizedConfig normalize_scale(const PolygonalKnot& p) {
  if (const auto e = is_embedded(p); !e.embedded) {
    throw GeometryError("cannot normalize a non-embedded polygon");
  }
  const double t = thickness_value(p);
  if (!(t > 0.0) || !std::isfinite(t)) throw GeometryError("thickness is not positive and finite");
  PolygonalKnot k = p.scaled(1.0 / t);
  const double len = length(k);
  Fingerprint fp = fingerprint(k);
  return NormalizedConfig{std::move(k), len, len, std::move(fp)};
}

/// Result of aligning y onto x.
struct Alignment {
  PolygonalKnot aligned;  // relabeled, rotated and translated copy of y
  double distance = kInf;  // RMS vertex distance to x
  std::size_t shift = 0;
  bool reversed = false;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

namespace detail {

inline std::size_t relabel(std::size_t i, std::size_t shift, bool reversed, std::size_t n) {
  return reversed ? (shift + n - i) % n : (shift + i) % n;
}

/// Proper rotation R minimizing sum |R b_i - a_i|^2 for centered point sets.
inline Mat3 proper_rotation(const Mat3& covariance) {
  Eigen::JacobiSVD<Mat3> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

}  // namespace detail

/// Best proper rigid motion and dihedral relabeling carrying y onto x.
/// Ties keep the first relabeling in scan order (forward shifts, then reversed).
inline Alignment align(const PolygonalKnot& x, const PolygonalKnot& y) {
  const std::size_t n = x.size();
  if (y.size() != n) throw ValidationError("align: vertex counts differ");
  const Vec3 cx = x.centroid();
  const Vec3 cy = y.centroid();
  std::vector<Vec3> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[i] - cx;
    ys[i] = y[i] - cy;
  }

  double best_sq = kInf;
  std::size_t best_shift = 0;
  bool best_rev = false;
  Mat3 best_rot = Mat3::Identity();
  for (int rev = 0; rev < 2; ++rev) {
    for (std::size_t s = 0; s < n; ++s) {
      Mat3 cov = Mat3::Zero();
      for (std::size_t i = 0; i < n; ++i) cov += ys[detail::relabel(i, s, rev, n)] * xs[i].transpose();
      const Mat3 rot = detail::proper_rotation(cov);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) sq += (rot * ys[detail::relabel(i, s, rev, n)] - xs[i]).squaredNorm();
      if (sq < best_sq) {
        best_sq = sq;
        best_shift = s;
        best_rev = rev != 0;
        best_rot = rot;
      }
    }
  }

  std::vector<Vec3> out(n);
  const Vec3 translation = cx - best_rot * cy;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = best_rot * y[detail::relabel(i, best_shift, best_rev, n)] + translation;
  }
  return Alignment{PolygonalKnot(std::move(out)), std::sqrt(best_sq / static_cast<double>(n)),
                   best_shift, best_rev, best_rot, translation};
}

inline Alignment align(const NormalizedConfig& x, const NormalizedConfig& y) { return align(x.knot, y.knot); }

namespace detail {

inline bool lex_less(const PolygonalKnot& a, const PolygonalKnot& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      if (a[i][c] != b[i][c]) return a[i][c] < b[i][c];
    }
  }
  return false;
}

}  // namespace detail

/// RMS distance in the quotient; +inf when the vertex counts differ.
/// Evaluated in a canonical argument order so it is exactly symmetric.
inline double quotient_distance(const PolygonalKnot& x, const PolygonalKnot& y) {
  if (x.size() != y.size()) return kInf;
  if (x == y) return 0.0;
  return detail::lex_less(y, x) ? align(y, x).distance : align(x, y).distance;
}

inline double quotient_distance(const NormalizedConfig& x, const NormalizedConfig& y) {
  return quotient_distance(x.knot, y.knot);
}

/// Lower bound on quotient_distance from sorted edge lengths:
/// |sorted(e) - sorted(e')|_2 <= 2 sqrt(n) * RMSD.
inline double fingerprint_lower_bound(const Fingerprint& a, const Fingerprint& b) {
  if (a.sorted_edge_lengths.size() != b.sorted_edge_lengths.size()) return kInf;
  double sq = 0.0;
  for (std::size_t i = 0; i < a.sorted_edge_lengths.size(); ++i) {
    const double d = a.sorted_edge_lengths[i] - b.sorted_edge_lengths[i];
    sq += d * d;
  }
  return std::sqrt(sq) / (2.0 * std::sqrt(static_cast<double>(a.sorted_edge_lengths.size())));
}

}  // namespace knotpersist
