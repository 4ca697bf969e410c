#pragma once

// Constrained ropelength minimization by stochastic pattern moves.

#include "knotpersist/geometry.hpp"
#include "knotpersist/knotid.hpp"
#include "knotpersist/normalize.hpp"
#include "knotpersist/parallel.hpp"
#include "knotpersist/seeds.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace knotpersist {

class OptimizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TightenParams {
  std::size_t max_iters = 8000;  // sweeps; a sweep makes n proposals
  double step_init = 0.05;       // largest move, in units of the target thickness
  double step_decay = 0.7;       // step multiplier when a sweep accepts too little
  double step_min = 1e-7;        // the final stage converges below this step
  double penalty_weight = 1e4;
  double anneal_temp = 1e-5;     // initial temperature, relative to the objective
  double anneal_decay = 0.9;     // per-sweep temperature multiplier
  std::uint64_t seed = 1;
  double target_thickness = 1.0;

  // sample_minimizers
  std::size_t restarts = 1;
  double dedup_tol = 1e-2;
  double restart_perturbation = 0.1;  // relative to the seed thickness
  std::size_t threads = 1;
};

struct TraceRow {
  double ropelength = 0.0;
  double thickness = 0.0;
  double length = 0.0;
};

struct TightenResult {
  NormalizedConfig final;
  std::vector<TraceRow> trace;  // one row per sweep, current state
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t polish_start = 0;  // trace rows from here on are non-increasing
};

/// Soft-min powers of the search stages. They are swept twice: first over the
/// local radius terms only (with the contact distance as a hard cap), then
/// with the contact terms included as well.
inline constexpr std::array<double, 10> kSoftPowers{8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
inline constexpr std::size_t kSearchStages = 2 * kSoftPowers.size();
/// A search stage ends once its step falls below this (relative to the target).
inline constexpr double kSoftStepMin = 1e-4;
/// Soft-min terms lighter than this relative weight are not enumerated.
inline constexpr double kSoftNeglect = 1e-4;
/// Annealing stops once the temperature falls below this fraction of its start.
inline constexpr double kAnnealCutoff = 1e-2;
/// Per-sweep acceptance rates that shrink or grow the step.
inline constexpr double kShrinkBelow = 0.05;
inline constexpr double kGrowAbove = 0.25;
/// Proposal mix: whole-polygon Fourier modes in the local frame, Laplacian
/// pulls, the rest profiled windows.
inline constexpr double kGlobalFraction = 0.1;
inline constexpr double kSmoothFraction = 0.25;
inline constexpr std::size_t kMaxMode = 4;
/// Extra repetitions of a successful greedy move.
inline constexpr int kPatternRepeats = 8;

namespace detail {

inline void validate(const TightenParams& p) {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  auto unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!positive(p.step_init) || !positive(p.step_min) || !positive(p.target_thickness) ||
      !unit(p.step_decay) || !unit(p.anneal_decay) || !(p.penalty_weight >= 0.0) ||
      !std::isfinite(p.penalty_weight) || !(p.anneal_temp >= 0.0) || !std::isfinite(p.anneal_temp) ||
      !(p.dedup_tol >= 0.0) || !(p.restart_perturbation >= 0.0) || !std::isfinite(p.restart_perturbation)) {
    throw ValidationError("invalid tighten parameters");
  }
}

struct State {
  std::vector<Vec3> v;
  double len = 0.0;
  double thick = 0.0;
  double soft = 0.0;  // soft-min thickness; equals thick when the power is 0
  double rop() const { return len / thick; }
  double key() const { return len / soft; }
};

/// Thickness, plus its p-norm soft minimum over every local radius term (each
/// vertex against each adjacent edge) and, with `contacts`, every doubly
/// critical half-distance whose weight is at least kSoftNeglect. The soft value
/// never exceeds half the doubly critical self-distance. Power 0 means the
/// exact minimum.
inline void measure(const PolygonalKnot& k, double power, bool contacts, State& s) {
  thread_local std::vector<double> terms;
  terms.clear();
  double rad = kInf;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double t = std::tan(0.5 * turning_angle(k, i));
    if (!(t > 0.0)) continue;
    const double a = k.edge(k.prev(i)).norm() / (2.0 * t);
    const double b = k.edge(i).norm() / (2.0 * t);
    rad = std::min({rad, a, b});
    terms.push_back(a);
    terms.push_back(b);
  }
  double dmin = kInf;
  const bool soft_contacts = contacts && power > 0.0;
  const double reach = soft_contacts ? std::pow(kSoftNeglect, -1.0 / power) : 1.0;
  for_each_doubly_critical(
      k, [&] { return soft_contacts ? 2.0 * reach * rad : std::min(dmin, 2.0 * rad); },
      [&](double d, const ArcPosition&, const ArcPosition&) {
        dmin = std::min(dmin, d);
        if (soft_contacts) terms.push_back(0.5 * d);
      });
  s.thick = std::min(rad, 0.5 * dmin);
  s.soft = s.thick;
  if (power > 0.0) {
    double sum = 0.0;
    for (double t : terms) sum += std::pow(t / s.thick, -power);
    s.soft = std::min(0.5 * dmin, s.thick * std::pow(sum, -1.0 / power));
  }
}

/// Minimizing the penalty objective s L + w max(0, 1 - s tau)^2 over the
/// homothety factor s leaves rop - rop^2 / (4 w) (for rop < 2w), a monotone
/// function of ropelength. Moves are therefore ranked by (soft) ropelength and
/// the size is reset to the optimal s once per sweep.
class Tightener {
 public:
  Tightener(const TightenParams& params, std::vector<Vec3> start)
      : prm_(params), rng_(params.seed) {
    cur_ = evaluate(std::move(start));
  }

  const State& current() const { return cur_; }
  double step() const { return step_; }

  /// Switches the ranking to another soft-min power (0 = exact) and resets the step.
  void set_power(double power, bool contacts) {
    power_ = power;
    contacts_ = contacts;
    cur_ = evaluate(std::move(cur_.v));
    step_ = prm_.step_init * prm_.target_thickness;
  }

  /// One sweep of n proposals; returns the accepted fraction.
  double sweep(double temperature) {
    const std::size_t n = cur_.v.size();
    std::size_t accepted = 0;
    for (std::size_t m = 0; m < n; ++m) {
      propose();
      if (!try_move(temperature)) continue;
      ++accepted;
      for (int rep = 0; rep < kPatternRepeats && temperature == 0.0; ++rep) {
        if (!try_move(0.0)) break;
      }
    }
    rescale(temperature);
    return static_cast<double>(accepted) / static_cast<double>(n);
  }

  void adapt(double acceptance) {
    if (acceptance < kShrinkBelow) {
      step_ *= prm_.step_decay;
    } else if (acceptance > kGrowAbove) {
      step_ = std::min(step_ / prm_.step_decay, prm_.step_init * prm_.target_thickness);
    }
  }

 private:
  State evaluate(std::vector<Vec3> v) const {
    State s;
    const PolygonalKnot k(v);
    s.len = length(k);
    measure(k, power_, contacts_, s);
    s.v = std::move(v);
    if (!std::isfinite(s.key()) || !(s.thick > 0.0)) throw OptimizationError("objective overflow");
    return s;
  }

  bool accept(const State& next, double temperature, double u) const {
    const double r = cur_.key();
    const double dr = next.key() - r;
    if (temperature > 0.0) return dr <= 0.0 || u < std::exp(-dr / (temperature * r));
    return dr < 0.0;
  }

  std::size_t uniform_index(std::size_t count) {
    return std::min(static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(count)), count - 1);
  }

  /// Half-width of a local window: 0 (one vertex) half the time, otherwise
  /// 2^j - 1 up to about half the polygon.
  std::size_t window_width() {
    const std::size_t n = cur_.v.size();
    if (uniform01(rng_) < 0.5) return 0;
    std::size_t levels = 1;
    while ((std::size_t{1} << (levels + 1)) <= n) ++levels;
    return std::min((std::size_t{1} << (uniform_index(levels) + 1)) - 1, (n - 1) / 2);
  }

  /// Draws delta_, a displacement of vertices start_, start_ + 1, ... (cyclic).
  void propose() {
    const std::size_t n = cur_.v.size();
    const double radius = std::min(step_, 0.5 * cur_.thick);
    const double kind = uniform01(rng_);
    if (kind < kGlobalFraction) {
      const std::size_t modes = std::max<std::size_t>(1, std::min(kMaxMode, n / 4));
      const double k = static_cast<double>(uniform_index(modes) + 1);
      const Vec3 a = uniform_in_ball(rng_);
      const Vec3 b = uniform_in_ball(rng_);
      start_ = 0;
      delta_.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double phase = 2.0 * M_PI * k * static_cast<double>(j) / static_cast<double>(n);
        const Vec3 c = std::cos(phase) * a + std::sin(phase) * b;
        delta_[j] = radius * M_SQRT1_2 * (frame(j) * c);
      }
      return;
    }
    const std::size_t width = window_width();
    const std::size_t span = 2 * width + 1;
    start_ = (uniform_index(n) + n - width) % n;
    delta_.assign(span, Vec3::Zero());
    if (kind < kGlobalFraction + kSmoothFraction) {
      // Pull each window vertex toward the midpoint of its neighbours.
      const double alpha = uniform01(rng_);
      double longest = 0.0;
      for (std::size_t k = 0; k < span; ++k) {
        const std::size_t j = (start_ + k) % n;
        delta_[k] = alpha * (0.5 * (cur_.v[(j + n - 1) % n] + cur_.v[(j + 1) % n]) - cur_.v[j]);
        longest = std::max(longest, delta_[k].norm());
      }
      if (longest > radius) {
        for (auto& d : delta_) d *= radius / longest;
      }
      return;
    }
    const Vec3 dir = radius * uniform_in_ball(rng_);
    const std::size_t shape = uniform_index(4);
    for (std::size_t k = 0; k < span; ++k) {
      // x in (-1, 1) across the window, 0 at the centre.
      const double x = (static_cast<double>(k) - static_cast<double>(width)) / static_cast<double>(width + 1);
      double weight = 1.0;
      switch (shape) {
        case 0: weight = 0.5 * (1.0 + std::cos(M_PI * x)); break;  // raised cosine
        case 1: weight = 1.0 - std::abs(x); break;                 // tent
        case 2: weight = x * x; break;                             // flanks only
        default: weight = 0.5 * (1.0 + x); break;                  // ramp
      }
      delta_[k] = weight * dir;
    }
  }

  /// Columns: tangent, curvature normal and binormal at vertex j.
  Mat3 frame(std::size_t j) const {
    const std::size_t n = cur_.v.size();
    const Vec3& p = cur_.v[(j + n - 1) % n];
    const Vec3& q = cur_.v[(j + 1) % n];
    const Vec3 t = (q - p).normalized();
    Vec3 nrm = p + q - 2.0 * cur_.v[j];
    nrm -= nrm.dot(t) * t;
    if (nrm.norm() < 1e-12) nrm = t.unitOrthogonal();
    nrm.normalize();
    Mat3 f;
    f << t, nrm, t.cross(nrm);
    return f;
  }

  /// Applies delta_ if every vertex moves less than the current thickness,
  /// the result stays embedded and the acceptance rule passes.
  bool try_move(double temperature) {
    const std::size_t n = cur_.v.size();
    std::vector<Vec3> v = cur_.v;
    double reach = 0.0;
    for (std::size_t k = 0; k < delta_.size(); ++k) {
      v[(start_ + k) % n] += delta_[k];
      reach = std::max(reach, delta_[k].norm());
    }
    if (!(reach < cur_.thick)) return false;
    const double u = uniform01(rng_);
    try {
      const PolygonalKnot k(v);
      if (delta_.size() >= n) {
        if (!is_embedded(k).embedded) return false;
      } else {
        touched_.clear();
        for (std::size_t e = 0; e <= delta_.size(); ++e) touched_.push_back((start_ + n - 1 + e) % n);
        if (!edges_clear(k, touched_)) return false;
      }
    } catch (const GeometryError&) {
      return false;
    }
    State next = evaluate(std::move(v));
    if (!accept(next, temperature, u)) return false;
    cur_ = std::move(next);
    return true;
  }

  /// Homothety about the centroid to the penalty-optimal working thickness
  /// target (1 - rop / (2 w)), or to the target itself when w = 0.
  void rescale(double temperature) {
    const double w = prm_.penalty_weight;
    const double working = w > 0.0 ? std::max(0.5, 1.0 - cur_.rop() / (2.0 * w)) : 1.0;
    const double s = working * prm_.target_thickness / cur_.thick;
    if (s == 1.0) return;
    Vec3 c = Vec3::Zero();
    for (const auto& x : cur_.v) c += x;
    c /= static_cast<double>(cur_.v.size());
    double reach = 0.0;
    std::vector<Vec3> v(cur_.v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = c + s * (cur_.v[i] - c);
      reach = std::max(reach, (v[i] - cur_.v[i]).norm());
    }
    if (!(reach < std::min(1.0, s) * cur_.thick)) return;
    State next = evaluate(std::move(v));
    if (temperature > 0.0 || next.key() <= cur_.key()) cur_ = std::move(next);
  }

  TightenParams prm_;
  std::mt19937_64 rng_;
  State cur_;
  double power_ = 0.0;
  bool contacts_ = false;
  double step_ = prm_.step_init * prm_.target_thickness;
  std::vector<Vec3> delta_;
  std::size_t start_ = 0;
  std::vector<std::size_t> touched_;
};

}  // namespace detail

/// Minimize length + w * max(0, 1 - thickness)^2 from `seed`, then normalize.
///
/// Stages: an exact greedy probe (a seed where no move helps at any step down
/// to step_min is reported converged), annealed soft-min search stages (see
/// kSoftPowers), and an exact greedy polish. Every accepted move displaces
/// each vertex by less than the current thickness and keeps the polygon
/// embedded, so the knot type never changes.
inline TightenResult tighten(const PolygonalKnot& seed, const TightenParams& params = {}) {
  detail::validate(params);
  if (const auto e = is_embedded(seed); !e.embedded) throw ValidationError("seed is not embedded");
  const std::uint64_t det = knot_determinant(seed);

  const PolygonalKnot start = seed.scaled(params.target_thickness / thickness_value(seed));
  detail::Tightener opt(params, std::vector<Vec3>(start.vertices().begin(), start.vertices().end()));

  enum class Stage { Probe, Search, Polish };
  Stage stage = Stage::Probe;
  std::size_t phase = 0;
  double temperature = params.anneal_temp;

  std::vector<TraceRow> trace;
  std::size_t polish_start = 0;
  bool converged = false;
  detail::State best = opt.current();
  for (std::size_t it = 0; it < params.max_iters && !converged; ++it) {
    const bool annealing = stage == Stage::Search && params.anneal_temp > 0.0 &&
                           temperature >= kAnnealCutoff * params.anneal_temp;
    const double rate = opt.sweep(annealing ? temperature : 0.0);
    opt.adapt(rate);
    const auto& s = opt.current();
    trace.push_back({s.rop(), s.thick, s.len});
    if (s.rop() < best.rop()) best = s;
    if (annealing) temperature *= params.anneal_decay;

    const double floor = params.step_min * params.target_thickness;
    switch (stage) {
      case Stage::Probe:
        if (rate > 0.0) {
          stage = Stage::Search;
          opt.set_power(kSoftPowers[0], false);
        } else {
          converged = opt.step() < floor;
        }
        break;
      case Stage::Search:
        if (!annealing && opt.step() < kSoftStepMin * params.target_thickness) {
          if (++phase < kSearchStages) {
            opt.set_power(kSoftPowers[phase % kSoftPowers.size()], phase >= kSoftPowers.size());
          } else {
            stage = Stage::Polish;
            polish_start = trace.size();
            opt.set_power(0.0, false);
          }
        }
        break;
      case Stage::Polish:
        converged = opt.step() < floor;
        break;
    }
  }
  if (stage == Stage::Search) polish_start = trace.size();

  NormalizedConfig final = normalize_scale(PolygonalKnot(std::move(best.v)));
  if (final.fingerprint.determinant != det) {
    throw OptimizationError("knot determinant changed during tightening");
  }
  const std::size_t iterations = trace.size();
  return TightenResult{std::move(final), std::move(trace), iterations, converged, polish_start};
}

/// Greedy deduplication in ropelength order: a config is dropped when it lies
/// within `tol` of one already kept. The result is sorted by ropelength.
inline std::vector<NormalizedConfig> deduplicate(std::vector<NormalizedConfig> configs, double tol) {
  std::vector<std::size_t> order(configs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return configs[a].ropelength < configs[b].ropelength;
  });
  std::vector<NormalizedConfig> kept;
  for (std::size_t i : order) {
    bool duplicate = false;
    for (const auto& k : kept) {
      if (fingerprint_lower_bound(k.fingerprint, configs[i].fingerprint) >= tol) continue;
      if (quotient_distance(k, configs[i]) < tol) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(std::move(configs[i]));
  }
  return kept;
}

/// Runs tighten on every seed x restart, ordered by (seed index, restart
/// index). Restart 0 starts from the seed itself, later restarts from a
/// deterministic perturbation of it. Each run's RNG seed is derived from
/// params.seed and its indices.
inline std::vector<TightenResult> tighten_all(const std::vector<PolygonalKnot>& seeds,
                                              const TightenParams& params, std::size_t restarts) {
  detail::validate(params);
  if (seeds.empty()) throw ValidationError("no seeds");
  if (restarts == 0) throw ValidationError("restarts must be positive");
  const std::uint64_t det = knot_determinant(seeds.front());
  for (const auto& s : seeds) {
    if (knot_determinant(s) != det) throw ValidationError("seeds have different knot determinants");
  }
  std::vector<std::optional<TightenResult>> slots(seeds.size() * restarts);
  parallel_for(slots.size(), params.threads, [&](std::size_t r) {
    const std::size_t a = r / restarts;
    const std::size_t b = r % restarts;
    TightenParams p = params;
    p.seed = derive_seed(params.seed, a, b);
    PolygonalKnot start = seeds[a];
    if (b > 0 && params.restart_perturbation > 0.0) {
      start = perturb(start, params.restart_perturbation * thickness_value(start), p.seed);
    }
    slots[r] = tighten(start, p);
  });
  std::vector<TightenResult> runs;
  runs.reserve(slots.size());
  for (auto& s : slots) runs.push_back(std::move(*s));
  return runs;
}

/// Distinct near-minimizers over seeds x restarts, sorted by ropelength.
inline std::vector<NormalizedConfig> sample_minimizers(const std::vector<PolygonalKnot>& seeds,
                                                       const TightenParams& params, std::size_t restarts) {
  auto runs = tighten_all(seeds, params, restarts);
  std::vector<NormalizedConfig> finals;
  finals.reserve(runs.size());
  for (auto& r : runs) finals.push_back(std::move(r.final));
  return deduplicate(std::move(finals), params.dedup_tol);
}

inline std::vector<NormalizedConfig> sample_minimizers(const std::vector<PolygonalKnot>& seeds,
                                                       const TightenParams& params) {
  return sample_minimizers(seeds, params, params.restarts);
}

}  // namespace knotpersist
