#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "knotpersist/persist.hpp"

#include <random>

using namespace knotpersist;
using namespace fixtures;

namespace {

double ngon_ropelength(std::size_t n) {
  return 2.0 * static_cast<double>(n) * std::tan(M_PI / static_cast<double>(n));
}

const NormalizedConfig& tight_unknot() {
  static const NormalizedConfig c = tighten(perturbed_32gon()).final;
  return c;
}

const NormalizedConfig& regular32() {
  static const NormalizedConfig c = normalize_scale(regular_polygon(32));
  return c;
}

NormalizedConfig thin_unknot(std::uint64_t seed) {
  return normalize_scale(perturb(regular_polygon(24), 0.05, seed));
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t steps) {
  std::vector<double> g(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  return g;
}

// Minimax path scales by Floyd-Warshall: mm[i][j] = smallest lambda at which
// i and j are joined by edges of scale <= lambda.
std::vector<std::vector<double>> minimax(std::size_t n, const std::vector<MergeEdge>& edges) {
  std::vector<std::vector<double>> mm(n, std::vector<double>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) mm[i][i] = -kInf;
  for (const auto& e : edges) {
    mm[e.a][e.b] = std::min(mm[e.a][e.b], e.scale);
    mm[e.b][e.a] = mm[e.a][e.b];
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mm[i][j] = std::min(mm[i][j], std::max(mm[i][k], mm[k][j]));
    }
  }
  return mm;
}

struct Synthetic {
  std::vector<double> births;
  std::vector<double> grid;
  std::vector<MergeEdge> edges;
};

// Random merge history: k nodes, most born at 1, some later; random edges on grid scales.
Synthetic random_history(std::mt19937_64& rng) {
  Synthetic s;
  const std::size_t k = 3 + static_cast<std::size_t>(uniform01(rng) * 10.0);
  s.grid = uniform_grid(1.0, 2.0, 21);
  for (std::size_t i = 0; i < k; ++i) {
    s.births.push_back(uniform01(rng) < 0.7 ? 1.0 : s.grid[1 + static_cast<std::size_t>(uniform01(rng) * 10.0)]);
  }
  const std::size_t m = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(2 * k));
  for (std::size_t e = 0; e < m; ++e) {
    const auto a = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k));
    const auto b = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k));
    if (a == b) continue;
    const double born = std::max(s.births[a], s.births[b]);
    std::vector<double> allowed;
    for (double g : s.grid) {
      if (g >= born) allowed.push_back(g);
    }
    s.edges.push_back({a, b, allowed[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(allowed.size()))], {}});
  }
  return s;
}

void expect_matches_minimax(const MergeTree& t, const MergeScaleMatrix& m) {
  const auto mm = minimax(t.size(), t.edges);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i == j) {
        EXPECT_EQ(m.mu[i][j], m.lambda_birth);
      } else {
        EXPECT_EQ(m.mu[i][j], mm[m.components[i]][m.components[j]]);
        EXPECT_EQ(m.above_ceiling[i][j], std::isinf(m.mu[i][j]));
      }
    }
  }
}

void for_each_subset(std::size_t n, std::size_t max_size, const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (!cur.empty()) fn(cur);
    if (cur.size() == max_size) return;
    for (std::size_t v = start; v < n; ++v) {
      cur.push_back(v);
      rec(v + 1);
      cur.pop_back();
    }
  };
  rec(0);
}

MergeFiltration filtration_from_mu(double birth, std::vector<std::vector<double>> mu, std::vector<double> grid) {
  MergeScaleMatrix m;
  m.lambda_birth = birth;
  m.mu = std::move(mu);
  m.lambda_grid = std::move(grid);
  const std::size_t k = m.mu.size();
  for (std::size_t i = 0; i < k; ++i) m.components.push_back(i);
  m.above_ceiling.assign(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) m.above_ceiling[i][j] = i != j && std::isinf(m.mu[i][j]);
  }
  return vr_filtration(m);
}

}  // namespace

// ---------------------------------------------------------------------------
// Paths

TEST(Connect, RigidCopyGivesSingleFrame) {
  const auto x = normalize_scale(perturbed_32gon());
  const auto y = normalize_scale(perturbed_32gon().transformed(some_rotation(), Vec3(4, -1, 2)).cyclic_shift(7));
  const auto p = connect(x, y, x.ropelength);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->frames.size(), 1u);
  EXPECT_TRUE(validate_path(*p, x.ropelength).ok);
}

TEST(Connect, NearbyUnknotMinimizersByStraightLine) {
  PersistParams params;
  params.attempts = 0;
  const double lambda = 1.05 * ngon_ropelength(32);
  const auto p = connect(regular32(), tight_unknot(), lambda, params);
  ASSERT_TRUE(p.has_value());
  EXPECT_GE(p->frames.size(), 2u);
  EXPECT_LE(p->scale, lambda);
  EXPECT_LT(p->max_step, p->min_thickness);
  EXPECT_GE(p->min_thickness, 1.0 - params.thickness_slack);
  EXPECT_EQ(p->determinant, 1u);
  const auto check = validate_path(*p, lambda);
  EXPECT_TRUE(check.ok) << check.failure;
}

TEST(Connect, ThinInterpolantsAreProjected) {
  const auto x = normalize_scale(regular_polygon(24));
  const auto y = thin_unknot(3);
  const double lambda = 1.01 * std::max(x.ropelength, y.ropelength);
  const auto p = connect(x, y, lambda);
  ASSERT_TRUE(p.has_value());
  EXPECT_TRUE(validate_path(*p, lambda).ok);
  // The plain interpolation dips below the slack; every stored frame does not.
  EXPECT_LT(thickness_value(interpolate(x.knot, align(x.knot, y.knot).aligned, 0.5)), 0.99);
  for (const auto& f : p->frames) EXPECT_GE(thickness_value(f), 1.0 - 1e-3);
}

TEST(Connect, SuccessIsMonotoneInLambda) {
  const auto x = normalize_scale(regular_polygon(24));
  const auto y = thin_unknot(1);
  const auto grid = uniform_grid(y.ropelength * 0.9, y.ropelength * 1.3, 17);
  bool seen = false;
  for (double lambda : grid) {
    const bool ok = connect(x, y, lambda).has_value();
    if (seen) EXPECT_TRUE(ok) << lambda;
    seen = seen || ok;
    if (lambda < y.ropelength) EXPECT_FALSE(ok);
  }
  EXPECT_TRUE(seen);
}

TEST(Connect, MirrorTrefoilsHaveNoCertificate) {
  const auto left = normalize_scale(trefoil(48));
  const auto right = normalize_scale(trefoil(48).mirrored());
  EXPECT_EQ(left.fingerprint.determinant, right.fingerprint.determinant);
  EXPECT_FALSE(connect(left, right, 1e6).has_value());
  EXPECT_FALSE(rescale_path(left, right).has_value());
}

TEST(Connect, RejectsMismatchedInputs) {
  const auto a = normalize_scale(regular_polygon(24));
  const auto b = normalize_scale(regular_polygon(32));
  EXPECT_THROW(connect(a, b, 100.0), ValidationError);
  const auto t = normalize_scale(trefoil(48));
  const auto u = normalize_scale(regular_polygon(48));
  EXPECT_THROW(connect(u, t, 1e6), ValidationError);
  EXPECT_THROW(rescale_path(u, t), ValidationError);
}

TEST(RescalePath, TrivialForEqualSamples) {
  const auto& x = tight_unknot();
  const auto p = rescale_path(x, x);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->frames.size(), 1u);
  EXPECT_DOUBLE_EQ(p->scale, x.ropelength);
}

TEST(RescalePath, ConnectsDistinctUnknotSamples) {
  const auto x = normalize_scale(regular_polygon(24));
  const auto y = thin_unknot(2);
  const auto p = rescale_path(x, y);
  ASSERT_TRUE(p.has_value());
  std::cout << "rescale_path scale " << p->scale << " for births " << x.ropelength << ", " << y.ropelength << "\n";
  EXPECT_LE(p->scale, 3.0 * std::max(x.ropelength, y.ropelength));
  EXPECT_TRUE(validate_path(*p).ok);
  EXPECT_TRUE(p->frames.front() == x.knot);
  EXPECT_LT(max_displacement(p->frames.back(), align(x.knot, y.knot).aligned), 1e-12);
}

TEST(ValidatePath, DetectsTampering) {
  const auto x = normalize_scale(regular_polygon(24));
  const auto p = connect(x, thin_unknot(1), 1e3).value();
  ASSERT_GE(p.frames.size(), 3u);
  ASSERT_TRUE(validate_path(p).ok);

  auto thin = p;
  thin.frames[1] = thin.frames[1].scaled(0.9);
  EXPECT_FALSE(validate_path(thin).ok);

  auto short_scale = p;
  short_scale.scale *= 0.99;
  EXPECT_FALSE(validate_path(short_scale).ok);
  EXPECT_FALSE(validate_path(p, p.scale * 0.99).ok);

  auto wrong_det = p;
  wrong_det.determinant = 3;
  EXPECT_FALSE(validate_path(wrong_det).ok);

  auto jump = p;
  jump.frames = {p.frames.front(), p.frames.back()};
  EXPECT_FALSE(validate_path(jump).ok);

  EXPECT_FALSE(validate_path(CertifiedPath{}).ok);
}

// ---------------------------------------------------------------------------
// Trees

TEST(MergeTree, SingleSample) {
  const auto& x = tight_unknot();
  const auto grid = uniform_grid(6.3, 12.6, 64);
  const auto t = merge_scan({x}, grid);
  EXPECT_TRUE(t.merges.empty());
  EXPECT_DOUBLE_EQ(first_birth(t), x.ropelength);
  for (double g : grid) EXPECT_EQ(components_at(t, g).size(), g >= x.ropelength ? 1u : 0u);
  const auto m = merge_scales(t, 1e-2);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.d_merge[0][0], 0.0);
  EXPECT_EQ(m.mu[0][0], x.ropelength);
  const auto f = vr_filtration(m);
  for (const auto& part : f.partitions) EXPECT_EQ(part.size(), 1u);
  EXPECT_TRUE(betti_check(f).pass);
  EXPECT_EQ(check_edge_monotone(t), "");
  EXPECT_EQ(check_first_birth(t), "");
}

TEST(MergeTree, TwoSamplesMergeAtSmallestCertifiedGridScale) {
  const auto x = normalize_scale(regular_polygon(24));
  const auto y = thin_unknot(3);
  const auto grid = uniform_grid(6.0, 30.0, 49);
  PersistParams params;
  params.rescale_edges = false;
  const auto t = merge_scan({x, y}, grid, params);
  ASSERT_EQ(t.edges.size(), 1u);
  ASSERT_EQ(t.merges.size(), 1u);
  const double s = t.edges[0].scale;
  EXPECT_EQ(t.merges[0].scale, s);
  EXPECT_EQ(t.merges[0].elder, 0u);
  EXPECT_EQ(t.merges[0].younger, 1u);
  const auto idx = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), s) - grid.begin());
  ASSERT_LT(idx, grid.size());
  EXPECT_TRUE(connect(x, y, grid[idx], params).has_value());
  if (idx > 0 && grid[idx - 1] >= y.ropelength) EXPECT_FALSE(connect(x, y, grid[idx - 1], params).has_value());
  EXPECT_EQ(components_at(t, std::nextafter(s, 0.0)).size(), 2u);
  EXPECT_EQ(components_at(t, s).size(), 1u);
  EXPECT_TRUE(validate_path(t.paths.at(*t.edges[0].path), s).ok);
  EXPECT_EQ(check_edge_monotone(t), "");
  EXPECT_EQ(check_first_birth(t), "");
}

TEST(MergeTree, ThreadCountDoesNotChangeTree) {
  std::vector<NormalizedConfig> samples{normalize_scale(regular_polygon(24)), thin_unknot(1), thin_unknot(2),
                                        thin_unknot(3)};
  const auto grid = uniform_grid(6.0, 30.0, 25);
  PersistParams params;
  const auto serial = merge_scan(samples, grid, params);
  params.threads = 3;
  const auto parallel = merge_scan(samples, grid, params);
  ASSERT_EQ(serial.edges.size(), parallel.edges.size());
  for (std::size_t e = 0; e < serial.edges.size(); ++e) {
    EXPECT_EQ(serial.edges[e].a, parallel.edges[e].a);
    EXPECT_EQ(serial.edges[e].b, parallel.edges[e].b);
    EXPECT_EQ(serial.edges[e].scale, parallel.edges[e].scale);
  }
}

TEST(MergeTree, MoreAttemptsNeverRaiseMergeScales) {
  std::vector<NormalizedConfig> samples{normalize_scale(regular_polygon(24)), thin_unknot(1), thin_unknot(2),
                                        thin_unknot(3)};
  const auto grid = uniform_grid(6.0, 40.0, 35);
  std::optional<MergeScaleMatrix> prev;
  for (std::size_t attempts : {0u, 1u, 2u, 4u}) {
    PersistParams params;
    params.attempts = attempts;
    const auto t = merge_scan(samples, grid, params);
    const auto m = merge_scales(t, 10.0);  // every sample in the ideal layer
    if (prev) {
      ASSERT_EQ(m.size(), prev->size());
      for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) EXPECT_LE(m.mu[i][j], prev->mu[i][j]);
      }
    }
    prev = m;
  }
}

TEST(MergeTree, CandidatePairs) {
  std::vector<NormalizedConfig> samples{normalize_scale(regular_polygon(24)), thin_unknot(1), thin_unknot(2),
                                        thin_unknot(3)};
  PersistParams params;
  EXPECT_EQ(candidate_pairs(samples, params).size(), 6u);
  params.exhaustive_limit = 2;
  params.nearest = 1;
  const auto pairs = candidate_pairs(samples, params);
  EXPECT_LE(pairs.size(), 4u);
  std::vector<bool> seen(4, false);
  for (auto [a, b] : pairs) {
    EXPECT_LT(a, b);
    seen[a] = seen[b] = true;
  }
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(MergeTree, ElderRuleAndValidation) {
  const auto t = build_tree({2.0, 1.0, 3.0}, {1, 2, 3, 4, 5, 6}, {{1, 2, 6.0, {}}, {0, 1, 5.0, {}}});
  ASSERT_EQ(t.merges.size(), 2u);
  EXPECT_EQ(t.merges[0].scale, 5.0);
  EXPECT_EQ(t.merges[0].elder, 1u);
  EXPECT_EQ(t.merges[0].younger, 0u);
  EXPECT_EQ(t.merges[1].elder, 1u);
  EXPECT_EQ(t.merges[1].younger, 2u);
  EXPECT_EQ(first_birth(t), 1.0);
  EXPECT_EQ(components_at(t, 0.5).size(), 0u);
  EXPECT_EQ(components_at(t, 2.0).size(), 2u);

  EXPECT_THROW(build_tree({1.0}, {2.0, 1.0}, {}), ValidationError);
  EXPECT_THROW(build_tree({}, {1.0}, {}), ValidationError);
  EXPECT_THROW(build_tree({1.0, 2.0}, {1.0, 2.0}, {{0, 1, 1.0, {}}}), ValidationError);
  EXPECT_THROW(merge_scan({}, {1.0}), ValidationError);
}

TEST(MergeTree, CheckersFlagCorruption) {
  auto t = build_tree({1.0, 1.0}, {1.0, 1.5, 2.0}, {{0, 1, 1.5, {}}});
  EXPECT_EQ(check_edge_monotone(t), "");
  EXPECT_EQ(check_first_birth(t), "");
  auto off_grid = t;
  off_grid.edges[0].scale = 1.7;
  EXPECT_NE(check_edge_monotone(off_grid), "");
  auto early = t;
  early.births = {1.6, 1.0};
  EXPECT_NE(check_edge_monotone(early), "");
}

// ---------------------------------------------------------------------------
// Merge scales

TEST(MergeScales, AllThreeNodeHistories) {
  // Every assignment of {absent, a, b, c} to the three possible edges.
  const std::vector<double> grid{1.0, 2.0, 3.0, 4.0};
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {1, 2}, {0, 2}};
  for (int code = 0; code < 64; ++code) {
    std::vector<MergeEdge> edges;
    int c = code;
    for (const auto& [a, b] : pairs) {
      const int pick = c % 4;
      c /= 4;
      if (pick > 0) edges.push_back({a, b, grid[static_cast<std::size_t>(pick)], {}});
    }
    const auto t = build_tree({1.0, 1.0, 1.0}, grid, edges);
    const auto m = merge_scales(t, 0.0);
    const std::size_t k = m.size();
    if (k == 3) {
      // Isosceles: the two largest pairwise scales coincide.
      std::array<double, 3> v{m.mu[0][1], m.mu[1][2], m.mu[0][2]};
      std::sort(v.begin(), v.end());
      EXPECT_EQ(v[1], v[2]) << code;
    }
    EXPECT_FALSE(ultrametric_violation(m.mu).has_value()) << code;
    expect_matches_minimax(t, m);
  }
}

TEST(MergeScales, ThreeComponentsMergingAtTwoScales) {
  // 0-1 merge at a, 1-2 at b > a: mu(0, 2) = max(mu(0, 1), mu(1, 2)) = b.
  const auto t = build_tree({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, {{0, 1, 2.0, {}}, {1, 2, 3.0, {}}});
  const auto m = merge_scales(t, 0.0);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.mu[0][1], 2.0);
  EXPECT_EQ(m.mu[1][2], 3.0);
  EXPECT_EQ(m.mu[0][2], 3.0);
  EXPECT_EQ(m.d_merge[0][2], 2.0);
}

TEST(MergeScales, RandomHistoriesAreUltrametric) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = random_history(rng);
    const auto t = build_tree(s.births, s.grid, s.edges);
    const auto m = merge_scales(t, 1e-2);
    ASSERT_FALSE(ultrametric_violation(m.mu).has_value()) << trial;
    expect_matches_minimax(t, m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) EXPECT_EQ(m.mu[i][j], m.mu[j][i]);
    }
  }
}

TEST(MergeScales, UnmergedPairsAreFlagged) {
  const auto t = build_tree({1.0, 1.0, 1.0}, {1.0, 2.0}, {{0, 1, 2.0, {}}});
  const auto m = merge_scales(t, 0.0);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_TRUE(m.above_ceiling[0][2]);
  EXPECT_FALSE(m.above_ceiling[0][1]);
  EXPECT_TRUE(std::isinf(m.d_merge[1][2]));
  const auto f = vr_filtration(m);
  EXPECT_EQ(f.isolated, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(betti_check(f).pass);
}

TEST(MergeScales, IdealLayerUsesBirthTolerance) {
  // Node 2 is born 5% late: outside a 1% layer, inside a 10% one.
  const auto t = build_tree({1.0, 1.0, 1.05}, {1.0, 1.05, 2.0}, {{0, 2, 2.0, {}}});
  EXPECT_EQ(merge_scales(t, 1e-2).size(), 2u);
  EXPECT_EQ(merge_scales(t, 1e-1).size(), 3u);
}

// ---------------------------------------------------------------------------
// Filtration

TEST(Filtration, SingleVertexAtEveryScale) {
  const auto f = filtration_from_mu(6.3, {{6.3}}, {6.3, 7.0, 8.0});
  EXPECT_EQ(f.scales.size(), 3u);
  for (const auto& p : f.partitions) EXPECT_EQ(p, (std::vector<std::vector<std::size_t>>{{0}}));
}

TEST(Filtration, TwoVerticesJoinAtMu) {
  const double b = 6.3;
  const auto f = filtration_from_mu(b, {{b, b + 1}, {b + 1, b}}, {b, b + 0.5, b + 1, b + 2});
  for (std::size_t s = 0; s < f.scales.size(); ++s) {
    EXPECT_EQ(f.partitions[s].size(), f.scales[s] >= b + 1 ? 1u : 2u) << f.scales[s];
  }
  EXPECT_EQ(simplex_threshold(f, {0, 1}), b + 1);
  EXPECT_EQ(definitional_threshold(f, {0, 1}), b + 1);
}

TEST(Filtration, ThreeVertexSchematic) {
  // Merges at l1 (0 with 1) then l2 (with 2).
  const double l0 = 1.0, l1 = 2.0, l2 = 3.0;
  const auto f = filtration_from_mu(l0, {{l0, l1, l2}, {l1, l0, l2}, {l2, l2, l0}}, {l0, l1, l2});
  ASSERT_EQ(f.scales, (std::vector<double>{l0, l1, l2}));
  using P = std::vector<std::vector<std::size_t>>;
  EXPECT_EQ(f.partitions[0], (P{{0}, {1}, {2}}));
  EXPECT_EQ(f.partitions[1], (P{{0, 1}, {2}}));
  EXPECT_EQ(f.partitions[2], (P{{0, 1, 2}}));
  const auto rep = betti_check(f);
  EXPECT_TRUE(rep.pass);
  ASSERT_EQ(rep.scales.size(), 3u);
  for (const auto& s : rep.scales) EXPECT_TRUE(s.pass);
}

TEST(Filtration, CorruptedFiltrationYieldsWitness) {
  const double l0 = 1.0, l1 = 2.0, l2 = 3.0;
  auto f = filtration_from_mu(l0, {{l0, l1, l2}, {l1, l0, l2}, {l2, l2, l0}}, {l0, l1, l2});
  f.mu[0][2] = f.mu[2][0] = kInf;  // 0-1-2 connected at l2 but 0, 2 never joined
  const auto rep = betti_check(f);
  EXPECT_FALSE(rep.pass);
  ASSERT_TRUE(rep.scales.back().witness.has_value());
  const auto [u, v, w] = *rep.scales.back().witness;
  EXPECT_LE(f.mu[u][v], l2);
  EXPECT_LE(f.mu[v][w], l2);
  EXPECT_GT(f.mu[u][w], l2);

  auto g = filtration_from_mu(l0, {{l0, l1, l2}, {l1, l0, l2}, {l2, l2, l0}}, {l0, l1, l2});
  g.partitions[1] = {{0}, {1}, {2}};
  EXPECT_FALSE(betti_check(g).pass);
}

TEST(Filtration, ThresholdsMatchDefinitionOnRandomHistories) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_history(rng);
    const auto m = merge_scales(build_tree(s.births, s.grid, s.edges), 1e-2);
    const auto f = vr_filtration(m);
    ASSERT_TRUE(betti_check(f).pass) << trial;
    for_each_subset(f.size(), 5, [&](const std::vector<std::size_t>& sigma) {
      EXPECT_EQ(definitional_threshold(f, sigma), simplex_threshold(f, sigma));
    });
    for (std::size_t i = 1; i < f.scales.size(); ++i) {
      // Monotone: classes only coarsen.
      for (const auto& cls : f.partitions[i - 1]) {
        EXPECT_LE(definitional_threshold(f, cls), f.scales[i - 1]);
      }
    }
  }
}
