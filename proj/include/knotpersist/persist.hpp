#pragma once

// Certified thick paths between samples, merge persistence over length
// scales, merge-scale matrices and the merge Vietoris-Rips filtration.

#include "knotpersist/geometry.hpp"
#include "knotpersist/knotid.hpp"
#include "knotpersist/normalize.hpp"
#include "knotpersist/optimize.hpp"
#include "knotpersist/parallel.hpp"
#include "knotpersist/seeds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace knotpersist {

struct PersistParams {
  double thickness_slack = 1e-3;
  double birth_tol = 1e-2;          // relative width of the ideal layer
  std::size_t nearest = 8;          // candidate partners per sample beyond exhaustive_limit
  std::size_t exhaustive_limit = 64;
  std::size_t attempts = 2;         // repair depth of connect; rescale_path tries 2 * attempts factors
  std::size_t repair_sweeps = 60;
  std::size_t max_frames = 4096;
  bool rescale_edges = true;        // merge_scan also tries rescale_path for every pair
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

/// A discrete thick isotopy: consecutive frames move every vertex by less than
/// the smallest frame thickness, so all frames have the same knot type.
struct CertifiedPath {
  std::vector<PolygonalKnot> frames;
  double scale = 0.0;  // longest frame
  double min_thickness = 0.0;
  double max_step = 0.0;
  std::uint64_t determinant = 1;
  double thickness_slack = 0.0;
};

struct PathCheck {
  bool ok = false;
  std::string failure;  // empty when ok
};

/// Inflation factors tried by rescale_path, in order.
inline constexpr std::array<double, 8> kInflationFactors{1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0};
/// Consecutive frames are spaced so no vertex moves more than this fraction
/// of the thickness floor.
inline constexpr double kFrameStep = 0.5;

/// Re-runs every frame check from the frames alone.
inline PathCheck validate_path(const CertifiedPath& path, double lambda = kInf) {
  auto fail = [](std::string why) { return PathCheck{false, std::move(why)}; };
  if (path.frames.empty()) return fail("no frames");
  const std::size_t n = path.frames.front().size();
  double longest = 0.0;
  double thinnest = kInf;
  double step = 0.0;
  for (std::size_t f = 0; f < path.frames.size(); ++f) {
    const auto& k = path.frames[f];
    const std::string at = " at frame " + std::to_string(f);
    if (k.size() != n) return fail("vertex count changes" + at);
    if (!is_embedded(k).embedded) return fail("not embedded" + at);
    const double t = thickness_value(k);
    if (t < 1.0 - path.thickness_slack) return fail("thickness below 1 - slack" + at);
    if (knot_determinant(k) != path.determinant) return fail("determinant changes" + at);
    longest = std::max(longest, length(k));
    thinnest = std::min(thinnest, t);
    if (f > 0) step = std::max(step, max_displacement(path.frames[f - 1], k));
  }
  if (longest > path.scale) return fail("a frame is longer than the recorded scale");
  if (path.scale > lambda) return fail("scale exceeds lambda");
  if (!(step < thinnest)) return fail("max_step is not below min_thickness");
  if (thinnest < path.min_thickness || step > path.max_step) return fail("recorded certificate does not match frames");
  return {true, {}};
}

namespace detail {

inline bool frame_ok(const PolygonalKnot& k, double lambda, double slack, std::uint64_t det) {
  try {
    return is_embedded(k).embedded && length(k) <= lambda && thickness_value(k) >= 1.0 - slack &&
           knot_determinant(k) == det;
  } catch (const GeometryError&) {
    return false;
  }
}

inline CertifiedPath summarize(std::vector<PolygonalKnot> frames, std::uint64_t det, double slack) {
  CertifiedPath p;
  p.min_thickness = kInf;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    p.scale = std::max(p.scale, length(frames[f]));
    p.min_thickness = std::min(p.min_thickness, thickness_value(frames[f]));
    if (f > 0) p.max_step = std::max(p.max_step, max_displacement(frames[f - 1], frames[f]));
  }
  p.frames = std::move(frames);
  p.determinant = det;
  p.thickness_slack = slack;
  return p;
}

/// Homothety about the centroid to thickness 1.
inline std::optional<PolygonalKnot> unit_thickness(const PolygonalKnot& k) {
  if (!is_embedded(k).embedded) return std::nullopt;
  const double t = thickness_value(k);
  const Vec3 c = k.centroid();
  std::vector<Vec3> v(k.vertices().begin(), k.vertices().end());
  for (auto& p : v) p = c + (p - c) / t;
  return PolygonalKnot(std::move(v));
}

/// Appends the interior frames of the straight segment a -> b and b itself,
/// or leaves `out` untouched and returns false if a frame is infeasible. With
/// `project`, every interpolated frame is first dilated to thickness 1, and the
/// subdivision is refined until consecutive frames are close enough.
inline bool straight_segment(const PolygonalKnot& a, const PolygonalKnot& b, double lambda, double slack,
                             std::uint64_t det, std::size_t max_frames, bool project,
                             std::vector<PolygonalKnot>& out) {
  const double d = max_displacement(a, b);
  double m = std::max(1.0, std::ceil(d / (kFrameStep * (1.0 - slack))));
  for (; m <= static_cast<double>(max_frames); m *= 2.0) {
    const auto count = static_cast<std::size_t>(m);
    std::vector<PolygonalKnot> frames;
    frames.reserve(count);
    double step = 0.0;
    for (std::size_t k = 1; k < count; ++k) {
      PolygonalKnot f = interpolate(a, b, static_cast<double>(k) / m);
      if (project) {
        auto g = unit_thickness(f);
        if (!g) return false;
        f = std::move(*g);
      }
      if (!frame_ok(f, lambda, slack, det)) return false;
      step = std::max(step, max_displacement(frames.empty() ? a : frames.back(), f));
      frames.push_back(std::move(f));
    }
    step = std::max(step, max_displacement(frames.empty() ? a : frames.back(), b));
    if (step < kFrameStep * 2.0 * (1.0 - slack)) {
      frames.push_back(b);
      out.insert(out.end(), std::make_move_iterator(frames.begin()), std::make_move_iterator(frames.end()));
      return true;
    }
    if (!project) return false;
  }
  return false;
}

/// Short greedy tightening of `k`, aligned back onto it.
inline std::optional<PolygonalKnot> repair(const PolygonalKnot& k, const PersistParams& params, std::uint64_t node) {
  if (!is_embedded(k).embedded) return std::nullopt;
  TightenParams tp;
  tp.max_iters = params.repair_sweeps;
  tp.anneal_temp = 0.0;
  tp.seed = derive_seed(params.seed, node);
  try {
    const auto r = tighten(k, tp);
    return align(k, r.final.knot).aligned;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// Straight segment, then the thickness-projected straight segment, else split
/// at a repaired midpoint. `node` numbers the
/// recursion tree (root 1, children 2i and 2i + 1) so repairs never depend on
/// lambda or on which sibling was tried first; success is then monotone in
/// both lambda and attempts.
inline bool connect_segment(const PolygonalKnot& a, const PolygonalKnot& b, double lambda, std::uint64_t det,
                            const PersistParams& params, std::size_t depth, std::uint64_t node,
                            std::vector<PolygonalKnot>& out) {
  const double slack = params.thickness_slack;
  if (straight_segment(a, b, lambda, slack, det, params.max_frames, false, out) ||
      straight_segment(a, b, lambda, slack, det, params.max_frames, true, out)) {
    return true;
  }
  if (depth >= params.attempts) return false;
  const auto r = repair(interpolate(a, b, 0.5), params, node);
  if (!r || !frame_ok(*r, lambda, slack, det)) return false;
  const std::size_t mark = out.size();
  if (connect_segment(a, *r, lambda, det, params, depth + 1, 2 * node, out) &&
      connect_segment(*r, b, lambda, det, params, depth + 1, 2 * node + 1, out)) {
    return true;
  }
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(mark), out.end());
  return false;
}

inline void require_same_type(const NormalizedConfig& x, const NormalizedConfig& y) {
  if (x.size() != y.size()) throw ValidationError("samples have different vertex counts");
  if (x.fingerprint.determinant != y.fingerprint.determinant) {
    throw ValidationError("samples have different knot determinants");
  }
}

}  // namespace detail

/// Certified path from x to (an aligned copy of) y with every frame of length
/// at most lambda, or nullopt. Tries the straight line after alignment, the
/// same line with frames dilated to thickness 1, then up to params.attempts
/// levels of midpoint repair by short tightening.
inline std::optional<CertifiedPath> connect(const NormalizedConfig& x, const NormalizedConfig& y, double lambda,
                                            const PersistParams& params = {}) {
  detail::require_same_type(x, y);
  const std::uint64_t det = x.fingerprint.determinant;
  const double slack = params.thickness_slack;
  if (!detail::frame_ok(x.knot, lambda, slack, det)) return std::nullopt;
  PolygonalKnot target = align(x.knot, y.knot).aligned;
  if (max_displacement(x.knot, target) < 1e-12) return detail::summarize({x.knot}, det, slack);
  if (!detail::frame_ok(target, lambda, slack, det)) return std::nullopt;
  std::vector<PolygonalKnot> frames{x.knot};
  if (!detail::connect_segment(x.knot, target, lambda, det, params, 0, 1, frames)) return std::nullopt;
  return detail::summarize(std::move(frames), det, slack);
}

/// Inflate x about its centroid, cross to y at the inflated size, deflate.
/// Returns the first factor in kInflationFactors (up to 2 * attempts of them)
/// whose path certifies, or nullopt. Never connects different knot types: the
/// frame spacing is a tube certificate.
inline std::optional<CertifiedPath> rescale_path(const NormalizedConfig& x, const NormalizedConfig& y,
                                                 const PersistParams& params = {}) {
  detail::require_same_type(x, y);
  const std::uint64_t det = x.fingerprint.determinant;
  const double slack = params.thickness_slack;
  const PolygonalKnot target = align(x.knot, y.knot).aligned;
  if (max_displacement(x.knot, target) < 1e-12) return detail::summarize({x.knot}, det, slack);

  const Vec3 c = x.knot.centroid();
  auto homothety = [&](const PolygonalKnot& k, double s) {
    std::vector<Vec3> v(k.vertices().begin(), k.vertices().end());
    for (auto& p : v) p = c + s * (p - c);
    return PolygonalKnot(std::move(v));
  };
  auto radius = [&](const PolygonalKnot& k) {
    double r = 0.0;
    for (const auto& p : k.vertices()) r = std::max(r, (p - c).norm());
    return r;
  };
  // Frames of k scaled from s0 to s1, excluding s0.
  auto sweep_scale = [&](const PolygonalKnot& k, double s0, double s1, std::vector<PolygonalKnot>& out) {
    const double m = std::max(1.0, std::ceil(std::abs(s1 - s0) * radius(k) / kFrameStep));
    for (double j = 1; j <= m; ++j) out.push_back(homothety(k, s0 + (s1 - s0) * j / m));
  };

  const std::size_t tries = std::min(kInflationFactors.size(), 2 * params.attempts);
  for (std::size_t t = 0; t < tries; ++t) {
    const double s = kInflationFactors[t];
    std::vector<PolygonalKnot> frames{x.knot};
    sweep_scale(x.knot, 1.0, s, frames);
    if (frames.size() > params.max_frames) continue;
    const PolygonalKnot big_y = homothety(target, s);
    if (!detail::frame_ok(big_y, kInf, slack, det)) continue;
    if (!detail::straight_segment(frames.back(), big_y, kInf, slack, det, params.max_frames, false, frames)) continue;
    sweep_scale(target, s, 1.0, frames);
    frames.back() = target;
    if (frames.size() > params.max_frames) continue;
    auto path = detail::summarize(std::move(frames), det, slack);
    if (validate_path(path).ok) return path;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Merge trees

struct MergeEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double scale = 0.0;  // grid scale at which the pair is certified
  std::optional<std::size_t> path;  // index into MergeTree::paths
};

/// Union of two components; `elder` survives (smaller birth, then smaller id).
struct MergeEvent {
  double scale = 0.0;
  std::size_t elder = 0;
  std::size_t younger = 0;
};

struct MergeTree {
  std::vector<double> lambda_grid;
  std::vector<double> births;
  std::vector<NormalizedConfig> samples;  // empty for synthetic trees
  std::vector<MergeEdge> edges;           // sorted by (scale, a, b)
  std::vector<CertifiedPath> paths;
  std::vector<MergeEvent> merges;         // in union order

  std::size_t size() const noexcept { return births.size(); }
  double ceiling() const { return lambda_grid.empty() ? kInf : lambda_grid.back(); }
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(const std::vector<double>& births) : births_(births), parent_(births.size()) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  /// Joins the classes of a and b; returns {elder, younger} roots if they differed.
  std::optional<std::pair<std::size_t, std::size_t>> unite(std::size_t a, std::size_t b) {
    std::size_t ra = find(a), rb = find(b);
    if (ra == rb) return std::nullopt;
    if (births_[rb] < births_[ra] || (births_[rb] == births_[ra] && rb < ra)) std::swap(ra, rb);
    parent_[rb] = ra;
    return std::pair{ra, rb};
  }

 private:
  const std::vector<double>& births_;
  std::vector<std::size_t> parent_;
};

inline void require_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ValidationError("empty lambda grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || (i > 0 && !(grid[i - 1] < grid[i]))) {
      throw ValidationError("lambda grid must be finite and strictly increasing");
    }
  }
}

}  // namespace detail

/// Sorts the edges and replays union-find to fill in the merge log.
inline MergeTree build_tree(std::vector<double> births, std::vector<double> grid, std::vector<MergeEdge> edges) {
  detail::require_grid(grid);
  if (births.empty()) throw ValidationError("merge tree needs at least one node");
  for (auto& e : edges) {
    if (e.a == e.b || e.a >= births.size() || e.b >= births.size()) throw ValidationError("bad edge endpoints");
    if (e.a > e.b) std::swap(e.a, e.b);
    if (e.scale < std::max(births[e.a], births[e.b])) throw ValidationError("edge active before its endpoints exist");
  }
  std::sort(edges.begin(), edges.end(), [](const MergeEdge& l, const MergeEdge& r) {
    return std::tie(l.scale, l.a, l.b) < std::tie(r.scale, r.a, r.b);
  });
  MergeTree t;
  t.lambda_grid = std::move(grid);
  t.births = std::move(births);
  t.edges = std::move(edges);
  detail::UnionFind uf(t.births);
  for (const auto& e : t.edges) {
    if (const auto m = uf.unite(e.a, e.b)) t.merges.push_back({e.scale, m->first, m->second});
  }
  return t;
}

/// Nodes born by lambda, grouped by component; groups sorted by smallest id.
inline std::vector<std::vector<std::size_t>> components_at(const MergeTree& t, double lambda) {
  detail::UnionFind uf(t.births);
  for (const auto& e : t.edges) {
    if (e.scale > lambda) break;
    uf.unite(e.a, e.b);
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(t.size(), SIZE_MAX);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.births[i] > lambda) continue;
    const std::size_t r = uf.find(i);
    if (slot[r] == SIZE_MAX) {
      slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[slot[r]].push_back(i);
  }
  return groups;
}

/// Smallest sampled ropelength: an upper bound for the minimal ropelength.
inline double first_birth(const MergeTree& t) {
  if (t.births.empty()) throw ValidationError("empty merge tree");
  return *std::min_element(t.births.begin(), t.births.end());
}

/// Smallest grid index whose scale certifies a connection, by bisection over
/// [lo, grid.size()); connect success is monotone in lambda.
template <class Try>
std::optional<std::size_t> smallest_certified(const std::vector<double>& grid, std::size_t lo, Try&& attempt) {
  std::size_t hi = grid.size() - 1;
  if (lo > hi || !attempt(grid[hi])) return std::nullopt;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (attempt(grid[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return hi;
}

/// Candidate pairs (a < b): all pairs up to exhaustive_limit samples, else the
/// union of each sample's `nearest` quotient-distance neighbours.
inline std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(const std::vector<NormalizedConfig>& s,
                                                                        const PersistParams& params) {
  const std::size_t n = s.size();
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n <= params.exhaustive_limit) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) out.emplace_back(a, b);
    }
    return out;
  }
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  parallel_for(n, params.threads, [&](std::size_t a) {
    for (std::size_t b = 0; b < n; ++b) d[a][b] = a == b ? 0.0 : quotient_distance(s[a], s[b]);
  });
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return d[a][l] < d[a][r]; });
    std::size_t taken = 0;
    for (std::size_t b : order) {
      if (taken == params.nearest) break;
      if (b == a || !std::isfinite(d[a][b])) continue;
      out.emplace_back(std::min(a, b), std::max(a, b));
      ++taken;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Certified merge persistence of deduplicated samples over a sorted grid.
/// Each candidate pair gets the smallest grid scale certified by connect (and,
/// with rescale_edges, by rescale_path); union-find then runs in scale order.
inline MergeTree merge_scan(std::vector<NormalizedConfig> samples, std::vector<double> grid,
                            const PersistParams& params = {}) {
  if (samples.empty()) throw ValidationError("merge_scan needs at least one sample");
  detail::require_grid(grid);
  for (const auto& s : samples) {
    if (s.fingerprint.determinant != samples.front().fingerprint.determinant) {
      throw ValidationError("samples have different knot determinants");
    }
  }
  std::vector<double> births;
  for (const auto& s : samples) births.push_back(s.ropelength);

  const auto pairs = candidate_pairs(samples, params);
  std::vector<std::optional<CertifiedPath>> found(pairs.size());
  std::vector<double> scale(pairs.size(), kInf);
  parallel_for(pairs.size(), params.threads, [&](std::size_t i) {
    const auto [a, b] = pairs[i];
    if (samples[a].size() != samples[b].size()) return;
    const double born = std::max(births[a], births[b]);
    const auto lo = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), born) - grid.begin());
    std::optional<CertifiedPath> best;
    const auto idx = smallest_certified(
        grid, lo, [&](double lambda) { return connect(samples[a], samples[b], lambda, params).has_value(); });
    if (idx) {
      best = connect(samples[a], samples[b], grid[*idx], params);
      scale[i] = grid[*idx];
    }
    if (params.rescale_edges) {
      if (auto r = rescale_path(samples[a], samples[b], params)) {
        const auto at = std::lower_bound(grid.begin() + static_cast<std::ptrdiff_t>(lo), grid.end(), r->scale);
        if (at != grid.end() && *at < scale[i]) {
          scale[i] = *at;
          best = std::move(r);
        }
      }
    }
    if (std::isfinite(scale[i])) found[i] = std::move(best);
  });

  std::vector<MergeEdge> edges;
  std::vector<CertifiedPath> paths;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!found[i]) continue;
    edges.push_back({pairs[i].first, pairs[i].second, scale[i], paths.size()});
    paths.push_back(std::move(*found[i]));
  }
  MergeTree t = build_tree(std::move(births), std::move(grid), std::move(edges));
  t.samples = std::move(samples);
  t.paths = std::move(paths);
  return t;
}

// ---------------------------------------------------------------------------
// Merge-scale matrix and filtration

struct MergeScaleMatrix {
  std::vector<std::vector<std::size_t>> members;  // ideal components, each sorted by node id
  std::vector<std::size_t> components;            // smallest member, used as the label
  double lambda_birth = 0.0;
  double ceiling = kInf;
  std::vector<double> lambda_grid;
  std::vector<std::vector<double>> mu;       // +inf where not merged by the ceiling
  std::vector<std::vector<double>> d_merge;  // mu - lambda_birth off the diagonal
  std::vector<std::vector<bool>> above_ceiling;

  std::size_t size() const noexcept { return components.size(); }
};

/// Ideal components are the classes present at lambda_birth * (1 + birth_tol);
/// mu(i, j) is the union-find scale at which their classes first coincide.
inline MergeScaleMatrix merge_scales(const MergeTree& t, double birth_tol) {
  if (!(birth_tol >= 0.0)) throw ValidationError("birth_tol must be non-negative");
  MergeScaleMatrix m;
  m.lambda_birth = first_birth(t);
  m.ceiling = t.ceiling();
  m.lambda_grid = t.lambda_grid;
  m.members = components_at(t, m.lambda_birth * (1.0 + birth_tol));
  const std::size_t k = m.members.size();
  for (const auto& g : m.members) m.components.push_back(g.front());

  m.mu.assign(k, std::vector<double>(k, kInf));
  for (std::size_t i = 0; i < k; ++i) m.mu[i][i] = m.lambda_birth;
  detail::UnionFind uf(t.births);
  std::size_t open = k * (k - 1) / 2;
  for (std::size_t e = 0; e < t.edges.size() && open > 0; ++e) {
    if (!uf.unite(t.edges[e].a, t.edges[e].b)) continue;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        if (std::isinf(m.mu[i][j]) && uf.find(m.components[i]) == uf.find(m.components[j])) {
          m.mu[i][j] = m.mu[j][i] = t.edges[e].scale;
          --open;
        }
      }
    }
  }
  m.d_merge.assign(k, std::vector<double>(k, 0.0));
  m.above_ceiling.assign(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      m.d_merge[i][j] = m.mu[i][j] - m.lambda_birth;
      m.above_ceiling[i][j] = std::isinf(m.mu[i][j]);
    }
  }
  return m;
}

/// First (i, j, k) with mu(i, k) > max(mu(i, j), mu(j, k)), if any.
inline std::optional<std::array<std::size_t, 3>> ultrametric_violation(const std::vector<std::vector<double>>& mu) {
  const std::size_t k = mu.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t l = 0; l < k; ++l) {
        if (mu[i][l] > std::max(mu[i][j], mu[j][l])) return std::array{i, j, l};
      }
    }
  }
  return std::nullopt;
}

struct MergeFiltration {
  double lambda_birth = 0.0;
  std::vector<std::size_t> labels;  // component labels, vertex v is labels[v]
  std::vector<std::vector<double>> mu;
  std::vector<double> scales;  // sorted scan scales, the first is lambda_birth
  /// Per scale, the merge classes as sorted vertex lists.
  std::vector<std::vector<std::vector<std::size_t>>> partitions;
  std::vector<std::size_t> isolated;  // vertices with a pair above the ceiling

  std::size_t size() const noexcept { return labels.size(); }
};

namespace detail {

/// Connected components of {mu <= lambda}.
inline std::vector<std::vector<std::size_t>> threshold_classes(const std::vector<std::vector<double>>& mu,
                                                               double lambda) {
  const std::size_t k = mu.size();
  std::vector<std::size_t> comp(k, SIZE_MAX);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < k; ++s) {
    if (comp[s] != SIZE_MAX) continue;
    comp[s] = out.size();
    std::vector<std::size_t> group{s};
    for (std::size_t q = 0; q < group.size(); ++q) {
      for (std::size_t v = 0; v < k; ++v) {
        if (comp[v] == SIZE_MAX && mu[group[q]][v] <= lambda) {
          comp[v] = out.size();
          group.push_back(v);
        }
      }
    }
    std::sort(group.begin(), group.end());
    out.push_back(std::move(group));
  }
  return out;
}

}  // namespace detail

/// Filtration over lambda_birth, every finite mu value and every grid scale
/// above lambda_birth. A simplex is present at lambda iff all its pairwise mu
/// are at most lambda.
inline MergeFiltration vr_filtration(const MergeScaleMatrix& m) {
  MergeFiltration f;
  f.lambda_birth = m.lambda_birth;
  f.labels = m.components;
  f.mu = m.mu;
  f.scales.push_back(m.lambda_birth);
  for (double g : m.lambda_grid) {
    if (g > m.lambda_birth) f.scales.push_back(g);
  }
  for (const auto& row : m.mu) {
    for (double x : row) {
      if (std::isfinite(x)) f.scales.push_back(x);
    }
  }
  std::sort(f.scales.begin(), f.scales.end());
  f.scales.erase(std::unique(f.scales.begin(), f.scales.end()), f.scales.end());
  for (double s : f.scales) f.partitions.push_back(detail::threshold_classes(f.mu, s));
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (m.above_ceiling[i][j]) {
        f.isolated.push_back(i);
        break;
      }
    }
  }
  return f;
}

/// max pairwise mu over sigma (lambda_birth for a single vertex).
inline double simplex_threshold(const MergeFiltration& f, const std::vector<std::size_t>& sigma) {
  double t = f.lambda_birth;
  for (std::size_t a : sigma) {
    for (std::size_t b : sigma) t = std::max(t, f.mu.at(a).at(b));
  }
  return t;
}

/// Smallest scanned scale at which all of sigma share one merge class.
inline double definitional_threshold(const MergeFiltration& f, const std::vector<std::size_t>& sigma) {
  for (std::size_t s = 0; s < f.scales.size(); ++s) {
    for (const auto& cls : f.partitions[s]) {
      if (std::all_of(sigma.begin(), sigma.end(),
                      [&](std::size_t v) { return std::binary_search(cls.begin(), cls.end(), v); })) {
        return f.scales[s];
      }
    }
  }
  return kInf;
}

struct BettiScaleCheck {
  double scale = 0.0;
  bool pass = true;
  std::optional<std::array<std::size_t, 3>> witness;  // u - v - w with u, w not joined
};

struct BettiReport {
  bool pass = true;
  std::vector<BettiScaleCheck> scales;
};

/// At every scale, each connected component of the merge graph must be a
/// clique and must equal one stored merge class.
inline BettiReport betti_check(const MergeFiltration& f) {
  BettiReport rep;
  const std::size_t k = f.size();
  for (std::size_t s = 0; s < f.scales.size(); ++s) {
    BettiScaleCheck c;
    c.scale = f.scales[s];
    const auto classes = detail::threshold_classes(f.mu, c.scale);
    auto joined = [&](std::size_t a, std::size_t b) { return f.mu[a][b] <= c.scale; };
    // A connected graph that is not a clique has a vertex with two
    // non-adjacent neighbours.
    for (std::size_t v = 0; v < k && !c.witness; ++v) {
      for (std::size_t u = 0; u < k && !c.witness; ++u) {
        for (std::size_t w = u + 1; w < k && !c.witness; ++w) {
          if (u != v && w != v && joined(u, v) && joined(v, w) && !joined(u, w)) c.witness = std::array{u, v, w};
        }
      }
    }
    c.pass = !c.witness && s < f.partitions.size() && f.partitions[s] == classes;
    rep.pass = rep.pass && c.pass;
    rep.scales.push_back(c);
  }
  if (f.partitions.size() != f.scales.size()) rep.pass = false;
  return rep;
}

/// Edge monotonicity of a (possibly deserialized) tree: edge scales lie on the
/// grid at or above both births, each certificate fits its scale, and the
/// active edge sets grow along the grid. Returns an empty string when it holds.
inline std::string check_edge_monotone(const MergeTree& t) {
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    const auto& ed = t.edges[e];
    const std::string at = "edge " + std::to_string(e) + ": ";
    if (!std::binary_search(t.lambda_grid.begin(), t.lambda_grid.end(), ed.scale)) return at + "scale not on grid";
    if (ed.scale < std::max(t.births.at(ed.a), t.births.at(ed.b))) return at + "active before birth";
    if (ed.path && t.paths.at(*ed.path).scale > ed.scale) return at + "certificate longer than scale";
  }
  std::vector<bool> prev(t.edges.size(), false);
  for (double g : t.lambda_grid) {
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
      const bool active = t.edges[e].scale <= g;
      if (prev[e] && !active) return "edge " + std::to_string(e) + " deactivates at " + std::to_string(g);
      prev[e] = active;
    }
  }
  return {};
}

/// First-birth consistency: no component below first_birth, at least one at
/// and above it, and the component count never rises once every node is born.
inline std::string check_first_birth(const MergeTree& t) {
  const double b0 = first_birth(t);
  const double last = *std::max_element(t.births.begin(), t.births.end());
  std::size_t prev = SIZE_MAX;
  for (double g : t.lambda_grid) {
    const std::size_t count = components_at(t, g).size();
    if (g < b0 && count != 0) return "component present below first birth at " + std::to_string(g);
    if (g >= b0 && count == 0) return "no component at " + std::to_string(g);
    if (g >= last) {
      if (count > prev) return "component count rises at " + std::to_string(g);
      prev = count;
    }
  }
  if (!components_at(t, std::nextafter(b0, -kInf)).empty()) return "component present just below first birth";
  return {};
}

}  // namespace knotpersist
