#pragma once

// Crossing diagrams of polygonal knots and the knot determinant |Delta(-1)|.

#include "knotpersist/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace knotpersist {

struct GaussEntry {
  int label = 0;  // 1-based crossing label
  bool over = false;
  int sign = 1;   // +1 right-handed, -1 left-handed
  friend bool operator==(const GaussEntry&, const GaussEntry&) = default;
};

struct Diagram {
  std::vector<GaussEntry> gauss_code;
  std::size_t crossing_count = 0;
  /// Projection direction (viewer side); zero for parsed codes.
  Vec3 direction = Vec3::Zero();
};

inline constexpr double kCrossingAngleMargin = 1e-6;
inline constexpr double kDepthSeparation = 1e-9;
inline constexpr std::size_t kMaxProjectionCandidates = 1024;

/// "O1+U2+O3+U1+O2+U3+"
inline std::string to_string(const Diagram& d) {
  std::string s;
  for (const auto& e : d.gauss_code) {
    s += e.over ? 'O' : 'U';
    s += std::to_string(e.label);
    s += e.sign > 0 ? '+' : '-';
  }
  return s;
}

inline void validate(const Diagram& d) {
  std::map<int, std::pair<int, int>> seen;  // label -> (#over, #under)
  std::map<int, int> sign;
  for (const auto& e : d.gauss_code) {
    if (e.label <= 0) throw ValidationError("gauss code: labels must be positive");
    if (e.sign != 1 && e.sign != -1) throw ValidationError("gauss code: sign must be +/-");
    auto& [o, u] = seen[e.label];
    (e.over ? o : u) += 1;
    auto [it, inserted] = sign.emplace(e.label, e.sign);
    if (!inserted && it->second != e.sign) {
      throw ValidationError("gauss code: crossing " + std::to_string(e.label) +
                            " has inconsistent signs");
    }
  }
  for (const auto& [label, counts] : seen) {
    if (counts.first != 1 || counts.second != 1) {
      throw ValidationError("gauss code: crossing " + std::to_string(label) +
                            " must appear exactly once over and once under");
    }
  }
  if (seen.size() != d.crossing_count) {
    throw ValidationError("gauss code: crossing count mismatch");
  }
}

inline Diagram parse_gauss_code(std::string_view text) {
  Diagram d;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    GaussEntry e;
    if (text[i] == 'O') {
      e.over = true;
    } else if (text[i] != 'U') {
      throw ValidationError("gauss code: expected 'O' or 'U' at offset " + std::to_string(i));
    }
    ++i;
    std::size_t start = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (start == i) throw ValidationError("gauss code: missing label at offset " + std::to_string(i));
    e.label = std::stoi(std::string(text.substr(start, i - start)));
    if (i >= text.size() || (text[i] != '+' && text[i] != '-')) {
      throw ValidationError("gauss code: missing sign at offset " + std::to_string(i));
    }
    e.sign = text[i] == '+' ? 1 : -1;
    ++i;
    d.gauss_code.push_back(e);
  }
  std::vector<int> labels;
  for (const auto& e : d.gauss_code) labels.push_back(e.label);
  std::sort(labels.begin(), labels.end());
  d.crossing_count = static_cast<std::size_t>(std::unique(labels.begin(), labels.end()) - labels.begin());
  validate(d);
  return d;
}

/// Deterministic golden-ratio sweep over the sphere.
inline Vec3 sweep_direction(std::size_t k, std::size_t count = kMaxProjectionCandidates) {
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(count);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = golden * static_cast<double>(k);
  return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

namespace detail {

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

struct CrossingEvent {
  double param;
  std::size_t crossing;
  bool over;
};

}  // namespace detail

/// Diagram of `p` viewed from `direction`, or nullopt if that projection is
/// not generic (near-tangent crossings, vertices on other strands, depth ties,
/// triple points, folded edges).
inline std::optional<Diagram> project_diagram_along(const PolygonalKnot& p, const Vec3& direction) {
  using Vec2 = Eigen::Vector2d;
  const std::size_t n = p.size();
  const Vec3 dir = direction.normalized();
  const Vec3 helper = std::abs(dir.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = (helper - helper.dot(dir) * dir).normalized();
  const Vec3 v = dir.cross(u);

  std::vector<Vec2> q(n);
  std::vector<double> depth(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = Vec2(p[i].dot(u), p[i].dot(v));
    depth[i] = p[i].dot(dir);
  }
  const Vec3 c = p.centroid();
  double extent = 0.0;
  for (std::size_t i = 0; i < n; ++i) extent = std::max(extent, (p[i] - c).norm());
  const double tol = 1e-9;

  auto seg = [&](std::size_t i) { return Vec2(q[p.next(i)] - q[i]); };
  for (std::size_t i = 0; i < n; ++i) {
    if (seg(i).norm() <= tol * extent) return std::nullopt;
    const Vec2 a = seg(p.prev(i));
    const Vec2 b = seg(i);
    if (std::abs(detail::cross2(a, b)) < kCrossingAngleMargin * a.norm() * b.norm() && a.dot(b) < 0.0) {
      return std::nullopt;
    }
  }

  struct Crossing {
    std::size_t over_edge, under_edge;
    double over_param, under_param;
    int sign;
  };
  std::vector<Crossing> crossings;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 d1 = seg(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (p.edges_adjacent(i, j)) continue;
      const Vec2 d2 = seg(j);
      const double denom = detail::cross2(d1, d2);
      const Vec2 r = q[j] - q[i];
      if (std::abs(denom) < kCrossingAngleMargin * d1.norm() * d2.norm()) {
        // Near-parallel projections: generic only if clearly apart.
        const double off = std::abs(detail::cross2(r, d1)) / d1.norm();
        if (off <= tol * extent) {
          const double t0 = r.dot(d1) / d1.squaredNorm();
          const double t1 = (q[p.next(j)] - q[i]).dot(d1) / d1.squaredNorm();
          if (std::max(t0, t1) >= -tol && std::min(t0, t1) <= 1.0 + tol) return std::nullopt;
        }
        continue;
      }
      const double s = detail::cross2(r, d2) / denom;
      const double t = detail::cross2(r, d1) / denom;
      const double es = tol * extent / d1.norm();
      const double et = tol * extent / d2.norm();
      if (s < -es || s > 1.0 + es || t < -et || t > 1.0 + et) continue;
      if (s <= es || s >= 1.0 - es || t <= et || t >= 1.0 - et) return std::nullopt;
      const double zi = depth[i] + s * (depth[p.next(i)] - depth[i]);
      const double zj = depth[j] + t * (depth[p.next(j)] - depth[j]);
      if (std::abs(zi - zj) < kDepthSeparation * std::max(1.0, extent)) return std::nullopt;
      const bool i_over = zi > zj;
      const Vec2 od = i_over ? d1 : d2;
      const Vec2 ud = i_over ? d2 : d1;
      const int sign = detail::cross2(od, ud) > 0.0 ? 1 : -1;
      if (i_over) {
        crossings.push_back({i, j, s, t, sign});
      } else {
        crossings.push_back({j, i, t, s, sign});
      }
    }
  }

  std::vector<std::vector<detail::CrossingEvent>> events(n);
  for (std::size_t k = 0; k < crossings.size(); ++k) {
    const auto& cr = crossings[k];
    events[cr.over_edge].push_back({cr.over_param, k, true});
    events[cr.under_edge].push_back({cr.under_param, k, false});
  }
  Diagram d;
  d.direction = dir;
  d.crossing_count = crossings.size();
  std::vector<int> label(crossings.size(), 0);
  int next_label = 1;
  for (std::size_t i = 0; i < n; ++i) {
    auto& ev = events[i];
    std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) { return a.param < b.param; });
    for (std::size_t k = 1; k < ev.size(); ++k) {
      if (ev[k].param - ev[k - 1].param <= tol * extent / seg(i).norm()) return std::nullopt;
    }
    for (const auto& e : ev) {
      if (label[e.crossing] == 0) label[e.crossing] = next_label++;
      d.gauss_code.push_back({label[e.crossing], e.over, crossings[e.crossing].sign});
    }
  }
  return d;
}

/// First generic projection in the deterministic direction sweep.
inline Diagram project_diagram(const PolygonalKnot& p) {
  for (std::size_t k = 0; k < kMaxProjectionCandidates; ++k) {
    if (auto d = project_diagram_along(p, sweep_direction(k))) return *d;
  }
  throw GeometryError("no generic projection direction found after " +
                      std::to_string(kMaxProjectionCandidates) + " candidates");
}

/// Up to `count` distinct generic projection directions from the sweep.
inline std::vector<Vec3> generic_directions(const PolygonalKnot& p, std::size_t count) {
  std::vector<Vec3> out;
  for (std::size_t k = 0; k < kMaxProjectionCandidates && out.size() < count; ++k) {
    if (project_diagram_along(p, sweep_direction(k))) out.push_back(sweep_direction(k));
  }
  return out;
}

namespace detail {

inline constexpr std::uint64_t kDetPrime = (std::uint64_t{1} << 61) - 1;

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % kDetPrime);
}

inline std::uint64_t powmod(std::uint64_t a, std::uint64_t e) {
  std::uint64_t r = 1;
  while (e) {
    if (e & 1) r = mulmod(r, a);
    a = mulmod(a, a);
    e >>= 1;
  }
  return r;
}

}  // namespace detail

/// Determinant of a square integer matrix, exact whenever |det| < 2^60.
///
/// Elimination runs modulo the Mersenne prime 2^61 - 1 and the residue is
/// lifted to the symmetric range.
inline std::int64_t integer_determinant(std::vector<std::vector<std::int64_t>> m) {
  using detail::kDetPrime;
  const std::size_t n = m.size();
  std::vector<std::vector<std::uint64_t>> a(n, std::vector<std::uint64_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::int64_t x = m[i][j] % static_cast<std::int64_t>(kDetPrime);
      a[i][j] = static_cast<std::uint64_t>(x < 0 ? x + static_cast<std::int64_t>(kDetPrime) : x);
    }
  }
  std::uint64_t det = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && a[pivot][col] == 0) ++pivot;
    if (pivot == n) return 0;
    if (pivot != col) {
      std::swap(a[pivot], a[col]);
      det = det == 0 ? 0 : kDetPrime - det;
    }
    det = detail::mulmod(det, a[col][col]);
    const std::uint64_t inv = detail::powmod(a[col][col], kDetPrime - 2);
    for (std::size_t r = col + 1; r < n; ++r) {
      if (a[r][col] == 0) continue;
      const std::uint64_t factor = detail::mulmod(a[r][col], inv);
      for (std::size_t c = col; c < n; ++c) {
        const std::uint64_t sub = detail::mulmod(factor, a[col][c]);
        a[r][c] = a[r][c] >= sub ? a[r][c] - sub : a[r][c] + kDetPrime - sub;
      }
    }
  }
  return det > kDetPrime / 2 ? static_cast<std::int64_t>(det) - static_cast<std::int64_t>(kDetPrime)
                             : static_cast<std::int64_t>(det);
}

/// Crossing-by-arc coloring matrix (the Alexander matrix at t = -1).
///
/// Arcs run from one undercrossing to the next. Row c has +2 at the over arc
/// and -1 at each of the two under arcs of crossing c.
inline std::vector<std::vector<std::int64_t>> coloring_matrix(const Diagram& d) {
  validate(d);
  const std::size_t c = d.crossing_count;
  std::vector<std::vector<std::int64_t>> m(c, std::vector<std::int64_t>(c, 0));
  if (c == 0) return m;
  const auto& code = d.gauss_code;

  // Arc k starts right after the k-th under entry in code order; entries
  // before the first under entry belong to the last arc.
  std::vector<std::size_t> arc_of(code.size());
  std::size_t unders = 0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    arc_of[i] = unders == 0 ? c - 1 : unders - 1;
    if (!code[i].over) ++unders;
  }
  std::map<int, std::size_t> row;
  for (const auto& e : code) row.emplace(e.label, row.size());

  std::map<int, std::size_t> over_arc;
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (code[i].over) over_arc[code[i].label] = arc_of[i];
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (code[i].over) continue;
    const std::size_t incoming = (k + c - 1) % c;
    const std::size_t outgoing = k;
    const std::size_t r = row.at(code[i].label);
    m[r][over_arc.at(code[i].label)] += 2;
    m[r][incoming] -= 1;
    m[r][outgoing] -= 1;
    ++k;
  }
  return m;
}

/// |Delta(-1)| from any diagram of the knot; 1 for the crossingless diagram.
inline std::uint64_t knot_determinant(const Diagram& d) {
  auto m = coloring_matrix(d);
  if (m.size() <= 1) return 1;
  m.pop_back();
  for (auto& r : m) r.pop_back();
  const std::int64_t det = integer_determinant(std::move(m));
  return static_cast<std::uint64_t>(det < 0 ? -det : det);
}

inline std::uint64_t knot_determinant(const PolygonalKnot& p) {
  return knot_determinant(project_diagram(p));
}

/// Sum of crossing signs; depends on the projection.
inline int writhe(const Diagram& d) {
  int w = 0;
  for (const auto& e : d.gauss_code) {
    if (e.over) w += e.sign;
  }
  return w;
}

}  // namespace knotpersist
