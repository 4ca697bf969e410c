#pragma once

// Length, curvature and discrete thickness of closed polygons in R^3.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace knotpersist {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Angular slack for normal-cone membership at a vertex.
inline constexpr double kNormalConeSlack = 1e-9;
/// Edge pairs whose directions differ by less than this are treated as parallel.
inline constexpr double kParallelAngle = 1e-6;

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Raised when a vertex reverses direction (turning angle pi).
class DegenerateVertexError : public GeometryError {
 public:
  explicit DegenerateVertexError(std::size_t vertex)
      : GeometryError("degenerate vertex " + std::to_string(vertex) +
                      ": turning angle is pi"),
        vertex_(vertex) {}
  std::size_t vertex() const noexcept { return vertex_; }

 private:
  std::size_t vertex_;
};

/// Closed polygon. Edge i joins vertex i to vertex (i+1) mod n.
///
/// Construction enforces n >= 3, finite coordinates and nonzero edges.
/// Embeddedness is a separate (quadratic) check, see is_embedded().
class PolygonalKnot {
 public:
  explicit PolygonalKnot(std::vector<Vec3> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) {
      throw GeometryError("polygon needs at least 3 vertices, got " +
                          std::to_string(vertices_.size()));
    }
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      if (!vertices_[i].allFinite()) {
        throw GeometryError("vertex " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      if (!(edge(i).squaredNorm() > 0.0)) {
        throw GeometryError("edge " + std::to_string(i) + " has zero length");
      }
    }
  }

  std::size_t size() const noexcept { return vertices_.size(); }
  const Vec3& operator[](std::size_t i) const noexcept { return vertices_[i]; }
  std::span<const Vec3> vertices() const noexcept { return vertices_; }

  std::size_t next(std::size_t i) const noexcept { return i + 1 == size() ? 0 : i + 1; }
  std::size_t prev(std::size_t i) const noexcept { return i == 0 ? size() - 1 : i - 1; }

  Vec3 edge(std::size_t i) const { return vertices_[next(i)] - vertices_[i]; }

  /// True if edges i and j share a vertex (or are equal).
  bool edges_adjacent(std::size_t i, std::size_t j) const noexcept {
    return i == j || next(i) == j || next(j) == i;
  }

  PolygonalKnot scaled(double s) const {
    auto v = vertices_;
    for (auto& p : v) p *= s;
    return PolygonalKnot(std::move(v));
  }

  PolygonalKnot transformed(const Mat3& rotation, const Vec3& translation) const {
    auto v = vertices_;
    for (auto& p : v) p = rotation * p + translation;
    return PolygonalKnot(std::move(v));
  }

  /// Relabel so that new vertex i is old vertex (i + k) mod n.
  PolygonalKnot cyclic_shift(std::size_t k) const {
    std::vector<Vec3> v(size());
    for (std::size_t i = 0; i < size(); ++i) v[i] = vertices_[(i + k) % size()];
    return PolygonalKnot(std::move(v));
  }

  /// Reverse orientation, keeping vertex 0 in place.
  PolygonalKnot reversed() const {
    std::vector<Vec3> v(size());
    for (std::size_t i = 0; i < size(); ++i) v[i] = vertices_[(size() - i) % size()];
    return PolygonalKnot(std::move(v));
  }

  PolygonalKnot mirrored() const {
    auto v = vertices_;
    for (auto& p : v) p.z() = -p.z();
    return PolygonalKnot(std::move(v));
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : vertices_) c += p;
    return c / static_cast<double>(size());
  }

  friend bool operator==(const PolygonalKnot& a, const PolygonalKnot& b) {
    return a.vertices_ == b.vertices_;
  }

 private:
  std::vector<Vec3> vertices_;
};

/// A point on the polygon: edge index plus barycentric coordinate in [0, 1).
struct ArcPosition {
  std::size_t edge = 0;
  double t = 0.0;
  friend bool operator==(const ArcPosition&, const ArcPosition&) = default;
};

inline Vec3 point_at(const PolygonalKnot& p, const ArcPosition& pos) {
  return p[pos.edge] + pos.t * p.edge(pos.edge);
}

inline double length(const PolygonalKnot& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p.edge(i).norm();
  return sum;
}

namespace detail {

inline bool is_reversal(const Vec3& a, const Vec3& b) {
  return a.cross(b).norm() <= 1e-15 * a.norm() * b.norm() && a.dot(b) < 0.0;
}

}  // namespace detail

/// Exterior angle at vertex i, in [0, pi].
inline double turning_angle(const PolygonalKnot& p, std::size_t i) {
  const Vec3 a = p.edge(p.prev(i));
  const Vec3 b = p.edge(i);
  if (detail::is_reversal(a, b)) return M_PI;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

inline double total_curvature(const PolygonalKnot& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double theta = turning_angle(p, i);
    if (theta >= M_PI) throw DegenerateVertexError(i);
    sum += theta;
  }
  return sum;
}

/// Radius of the largest circular arc inscribed at corner i; +inf when straight.
inline double vertex_radius(const PolygonalKnot& p, std::size_t i) {
  const double theta = turning_angle(p, i);
  if (theta >= M_PI) throw DegenerateVertexError(i);
  if (theta == 0.0) return kInf;
  const double shorter = std::min(p.edge(p.prev(i)).norm(), p.edge(i).norm());
  return shorter / (2.0 * std::tan(0.5 * theta));
}

struct MinRad {
  double value = kInf;
  std::size_t vertex = 0;
};

inline MinRad min_rad(const PolygonalKnot& p) {
  MinRad best;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = vertex_radius(p, i);
    if (r < best.value) best = {r, i};
  }
  return best;
}

struct ClosestPoints {
  double s = 0.0;  // parameter on the first segment
  double t = 0.0;  // parameter on the second segment
  double distance = 0.0;
};

/// Closest points between segments [p0, p1] and [q0, q1].
inline ClosestPoints segment_closest_points(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                            const Vec3& q1) {
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  const double c = d1.dot(r);
  const double b = d1.dot(d2);
  const double denom = a * e - b * b;

  double s = 0.0;
  if (denom > 1e-14 * a * e) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
  double t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  const double dist = ((p0 + s * d1) - (q0 + t * d2)).norm();
  return {s, t, dist};
}

inline double edge_distance(const PolygonalKnot& p, std::size_t i, std::size_t j) {
  return segment_closest_points(p[i], p[p.next(i)], p[j], p[p.next(j)]).distance;
}

struct DcsdResult {
  double value = kInf;
  std::optional<std::pair<ArcPosition, ArcPosition>> witness;
};

namespace detail {

/// Is the chord w (from vertex k to the partner point) inside the normal cone at k?
inline bool vertex_critical(const PolygonalKnot& p, std::size_t k, const Vec3& w) {
  const double wn = w.norm();
  if (wn == 0.0) return true;
  const double ca = w.dot(p.edge(p.prev(k)).normalized()) / wn;
  const double cb = w.dot(p.edge(k).normalized()) / wn;
  return std::min(ca, cb) <= kNormalConeSlack && std::max(ca, cb) >= -kNormalConeSlack;
}

inline bool foot_interior(const Vec3& x, const Vec3& a, const Vec3& e, double& t) {
  t = (x - a).dot(e) / e.squaredNorm();
  return t > 0.0 && t < 1.0;
}

}  // namespace detail

/// Visits every doubly critical candidate closer than bound().
///
/// Candidates: vertex-vertex, vertex to the foot on another edge, and interior
/// edge-edge pairs (closest points of skew lines, or the overlap midpoint for
/// parallel edges). A candidate counts only if its chord lies in the normal
/// cone at both ends. bound() is re-read between candidates, so a visitor that
/// tracks a running minimum prunes the rest of the scan.
template <class Bound, class Visit>
void for_each_doubly_critical(const PolygonalKnot& p, Bound&& bound, Visit&& visit) {
  const std::size_t n = p.size();
  std::vector<Vec3> mid(n);
  std::vector<double> half(n);
  for (std::size_t i = 0; i < n; ++i) {
    mid[i] = p[i] + 0.5 * p.edge(i);
    half[i] = 0.5 * p.edge(i).norm();
  }

  auto offer = [&](double d, ArcPosition a, ArcPosition b) {
    if (d < bound()) visit(d, a, b);
  };

  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ei = p.edge(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double lower = (mid[i] - mid[j]).norm() - half[i] - half[j];
      if (lower >= bound()) continue;
      const Vec3 ej = p.edge(j);

      // vertex i - vertex j
      {
        const Vec3 w = p[j] - p[i];
        const double d = w.norm();
        if (d < bound() && detail::vertex_critical(p, i, w) &&
            detail::vertex_critical(p, j, -w)) {
          offer(d, {i, 0.0}, {j, 0.0});
        }
      }
      // vertex i - interior of edge j
      if (i != p.next(j)) {
        double t = 0.0;
        if (detail::foot_interior(p[i], p[j], ej, t)) {
          const Vec3 w = (p[j] + t * ej) - p[i];
          const double d = w.norm();
          if (d < bound() && detail::vertex_critical(p, i, w)) offer(d, {i, 0.0}, {j, t});
        }
      }
      // interior of edge i - vertex j
      if (j != p.next(i)) {
        double s = 0.0;
        if (detail::foot_interior(p[j], p[i], ei, s)) {
          const Vec3 w = (p[i] + s * ei) - p[j];
          const double d = w.norm();
          if (d < bound() && detail::vertex_critical(p, j, w)) offer(d, {i, s}, {j, 0.0});
        }
      }
      // interior - interior
      if (!p.edges_adjacent(i, j)) {
        const double sin_angle = ei.cross(ej).norm() / (ei.norm() * ej.norm());
        if (sin_angle < kParallelAngle) {
          // Project edge j onto the line of edge i and take the overlap midpoint.
          double t0 = (p[j] - p[i]).dot(ei) / ei.squaredNorm();
          double t1 = (p[p.next(j)] - p[i]).dot(ei) / ei.squaredNorm();
          if (t0 > t1) std::swap(t0, t1);
          const double lo = std::max(0.0, t0);
          const double hi = std::min(1.0, t1);
          if (hi > lo) {
            const double s = 0.5 * (lo + hi);
            const Vec3 x = p[i] + s * ei;
            double t = 0.0;
            if (detail::foot_interior(x, p[j], ej, t) && s > 0.0 && s < 1.0) {
              const Vec3 w = (p[j] + t * ej) - x;
              const double d = w.norm();
              if (d < bound() &&
                  std::abs(w.dot(ei)) <= kParallelAngle * d * ei.norm()) {
                offer(d, {i, s}, {j, t});
              }
            }
          }
        } else {
          const Vec3 r = p[i] - p[j];
          const double a = ei.squaredNorm();
          const double e = ej.squaredNorm();
          const double b = ei.dot(ej);
          const double c = ei.dot(r);
          const double f = ej.dot(r);
          const double denom = a * e - b * b;
          const double s = (b * f - c * e) / denom;
          const double t = (a * f - b * c) / denom;
          if (s > 0.0 && s < 1.0 && t > 0.0 && t < 1.0) {
            const double d = ((p[i] + s * ei) - (p[j] + t * ej)).norm();
            offer(d, {i, s}, {j, t});
          }
        }
      }
    }
  }
}

/// Doubly critical self-distance. Values at or above `cutoff` are not resolved.
inline DcsdResult dcsd(const PolygonalKnot& p, double cutoff = kInf) {
  DcsdResult best;
  best.value = cutoff;
  for_each_doubly_critical(
      p, [&] { return best.value; },
      [&](double d, const ArcPosition& a, const ArcPosition& b) {
        best.value = d;
        best.witness = std::make_pair(a, b);
      });
  if (!best.witness) best.value = kInf;
  return best;
}

struct ThicknessReport {
  double min_rad = kInf;
  double dcsd = kInf;
  double thickness = kInf;
  std::size_t min_rad_witness = 0;
  std::optional<std::pair<ArcPosition, ArcPosition>> dcsd_witness;
};

inline ThicknessReport thickness(const PolygonalKnot& p) {
  ThicknessReport r;
  const MinRad mr = min_rad(p);
  const DcsdResult dc = dcsd(p);
  r.min_rad = mr.value;
  r.min_rad_witness = mr.vertex;
  r.dcsd = dc.value;
  r.dcsd_witness = dc.witness;
  r.thickness = std::min(r.min_rad, 0.5 * r.dcsd);
  return r;
}

/// Thickness value only; skips doubly critical pairs that cannot beat min_rad.
inline double thickness_value(const PolygonalKnot& p) {
  const double rad = min_rad(p).value;
  return std::min(rad, 0.5 * dcsd(p, 2.0 * rad).value);
}

inline double ropelength(const PolygonalKnot& p) { return length(p) / thickness_value(p); }

struct EmbeddingCheck {
  bool embedded = true;
  /// Closest violating pair of non-adjacent edges, if any.
  std::optional<std::pair<std::size_t, std::size_t>> witness;
  double witness_distance = kInf;
  std::optional<std::size_t> degenerate_vertex;
};

namespace detail {

inline void check_edge_pair(const PolygonalKnot& p, std::size_t i, std::size_t j,
                            double clearance, EmbeddingCheck& out) {
  const double d = edge_distance(p, i, j);
  if (d <= clearance && d < out.witness_distance) {
    out.embedded = false;
    out.witness = std::make_pair(std::min(i, j), std::max(i, j));
    out.witness_distance = d;
  }
}

}  // namespace detail

/// True iff non-adjacent edges stay farther apart than `clearance` and no
/// vertex reverses direction.
inline EmbeddingCheck is_embedded(const PolygonalKnot& p, double clearance = 0.0) {
  EmbeddingCheck out;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::is_reversal(p.edge(p.prev(i)), p.edge(i))) {
      out.embedded = false;
      out.degenerate_vertex = i;
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (p.edges_adjacent(i, j)) continue;
      detail::check_edge_pair(p, i, j, clearance, out);
    }
  }
  return out;
}

/// Embeddedness restricted to the given edges against every non-adjacent edge.
inline bool edges_clear(const PolygonalKnot& p, std::span<const std::size_t> edges,
                        double clearance = 0.0) {
  for (std::size_t e : edges) {
    if (detail::is_reversal(p.edge(p.prev(e)), p.edge(e)) ||
        detail::is_reversal(p.edge(e), p.edge(p.next(e)))) {
      return false;
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p.edges_adjacent(e, j)) continue;
      if (edge_distance(p, e, j) <= clearance) return false;
    }
  }
  return true;
}

/// Largest vertex displacement between two polygons with the same labelling.
inline double max_displacement(const PolygonalKnot& a, const PolygonalKnot& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

/// Vertex-wise straight-line interpolation (1 - t) a + t b.
inline PolygonalKnot interpolate(const PolygonalKnot& a, const PolygonalKnot& b, double t) {
  std::vector<Vec3> v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = (1.0 - t) * a[i] + t * b[i];
  return PolygonalKnot(std::move(v));
}

}  // namespace knotpersist
