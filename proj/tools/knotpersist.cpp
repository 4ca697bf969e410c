// knotpersist: seeds, tightening, persistence scans, exports and replay checks.

#include "knotpersist/io.hpp"
#include "knotpersist/seeds.hpp"
#include "knotpersist/svg.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace knotpersist;
namespace fs = std::filesystem;
using io::Json;

enum ExitCode : int { kOk = 0, kInvalid = 2, kCeiling = 3, kInternal = 4 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out = ".";
};

/// Collects the manifest of one command and writes it last.
class Run {
 public:
  Run(std::string command, std::vector<std::string> args, const Globals& g)
      : start_(std::chrono::steady_clock::now()), out_(g.out) {
    config = g.config.empty() ? io::RunConfig{} : io::read_config(g.config);
    if (g.seed) config.set_seed(*g.seed);
    if (g.threads) config.set_threads(*g.threads);
    manifest_.command = std::move(command);
    manifest_.args = std::move(args);
    if (!g.config.empty()) manifest_.inputs.push_back(g.config);
    fs::create_directories(out_);
  }

  std::string manifest_name() const { return manifest_.command + ".manifest.json"; }
  fs::path path(const std::string& rel) const { return out_ / rel; }
  void input(const std::string& p) { manifest_.inputs.push_back(p); }
  void output(const std::string& rel) { outputs_.push_back(rel); }

  void finish() {
    manifest_.config = io::config_json(config);
    manifest_.seed = config.tighten.seed;
    for (const auto& rel : outputs_) manifest_.outputs.push_back({rel, io::digest_file(out_ / rel)});
    manifest_.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_json(out_ / manifest_name(), io::manifest_json(manifest_));
  }

  io::RunConfig config;

 private:
  std::chrono::steady_clock::time_point start_;
  fs::path out_;
  io::RunManifest manifest_;
  std::vector<std::string> outputs_;
};

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  std::string kind;
  std::size_t n = 32;
  int p = 2, q = 3;
  double radius = 1.0;
  std::string input;
  double eps = 0.02;
  std::string name = "knot.json";
};

int cmd_gen(const GenOptions& o, Run& run) {
  std::optional<PolygonalKnot> k;
  if (o.kind == "ngon") {
    if (o.n < 3) throw ValidationError("ngon needs n >= 3");
    if (!(o.radius > 0.0)) throw ValidationError("radius must be positive");
    k = regular_polygon(o.n, o.radius);
  } else if (o.kind == "torus") {
    k = torus_knot(o.p, o.q, o.n);
  } else if (o.kind == "figure8") {
    k = figure_eight(o.n);
  } else if (o.kind == "perturb") {
    if (o.input.empty()) throw ValidationError("perturb needs --input");
    if (!(o.eps >= 0.0)) throw ValidationError("eps must be non-negative");
    run.input(o.input);
    const auto base = io::read_knot(o.input);
    io::analyze(base);
    k = perturb(base, o.eps, run.config.tighten.seed);
  } else {
    throw ValidationError("unknown kind '" + o.kind + "' (ngon, torus, figure8, perturb)");
  }
  const auto m = io::analyze(*k);
  io::write_knot(run.path(o.name), *k, run.manifest_name());
  run.output(o.name);
  run.finish();
  fmt::print("{}: {} vertices, ropelength {}, determinant {}\n", o.name, m.vertices, io::num(m.ropelength),
             m.determinant);
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze

int cmd_analyze(const std::string& file, Run& run) {
  run.input(file);
  const auto m = io::analyze(io::read_knot(file));
  const std::string name = fs::path(file).stem().string() + ".metrics.json";
  io::write_json(run.path(name), io::metrics_json(m, run.manifest_name()));
  run.output(name);
  run.finish();
  fmt::print("length {}\nmin_rad {} (vertex {})\ndcsd {}\nthickness {}\nropelength {}\ntotal_curvature {}\n"
             "determinant {}\n",
             io::num(m.length), io::num(m.min_rad), m.min_rad_vertex, io::num(m.dcsd), io::num(m.thickness),
             io::num(m.ropelength), io::num(m.total_curvature), m.determinant);
  return kOk;
}

// ---------------------------------------------------------------------------
// tighten

int cmd_tighten(const std::vector<std::string>& files, std::optional<std::size_t> restarts, Run& run) {
  std::vector<PolygonalKnot> seeds;
  for (const auto& f : files) {
    run.input(f);
    seeds.push_back(io::read_knot(f));
    try {
      io::analyze(seeds.back());
    } catch (const ValidationError& e) {
      throw ValidationError(f + ": " + e.what());
    }
  }
  auto& params = run.config.tighten;
  if (restarts) params.restarts = *restarts;
  const auto runs = tighten_all(seeds, params, params.restarts);

  Json summary = io::detail::header("knotpersist/tighten", run.manifest_name());
  Json rows = Json::array();
  bool all_converged = true;
  std::vector<NormalizedConfig> finals;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const std::size_t a = r / params.restarts, b = r % params.restarts;
    const auto& res = runs[r];
    const std::string stem = fmt::format("run_{:03d}_{:03d}", a, b);
    io::write_knot(run.path(stem + ".json"), res.final.knot, run.manifest_name());
    io::write_text(run.path(stem + ".trace.csv"), io::trace_csv(res.trace, run.manifest_name()));
    run.output(stem + ".json");
    run.output(stem + ".trace.csv");
    all_converged = all_converged && res.converged;
    rows.push_back({{"input", files[a]},
                    {"seed_index", a},
                    {"restart", b},
                    {"rng_seed", derive_seed(params.seed, a, b)},
                    {"iterations", res.iterations},
                    {"converged", res.converged},
                    {"polish_start", res.polish_start},
                    {"ropelength", io::number(res.final.ropelength)},
                    {"length", io::number(res.final.length)},
                    {"total_curvature", io::number(res.final.fingerprint.total_curvature)},
                    {"determinant", res.final.fingerprint.determinant},
                    {"final_ref", stem + ".json"},
                    {"trace_ref", stem + ".trace.csv"}});
    finals.push_back(res.final);
    fmt::print("{}: ropelength {} after {} sweeps{}\n", stem, io::num(res.final.ropelength), res.iterations,
               res.converged ? "" : " (iteration ceiling)");
  }
  const auto samples = deduplicate(std::move(finals), params.dedup_tol);
  Json sample_rows = Json::array();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const std::string name = fmt::format("sample_{:03d}.json", s);
    io::write_knot(run.path(name), samples[s].knot, run.manifest_name());
    run.output(name);
    sample_rows.push_back({{"ref", name}, {"ropelength", io::number(samples[s].ropelength)}});
  }
  summary["runs"] = rows;
  summary["samples"] = sample_rows;
  summary["dedup_tol"] = params.dedup_tol;
  io::write_json(run.path("tighten.json"), summary);
  run.output("tighten.json");
  run.finish();
  fmt::print("{} runs, {} distinct minimizer classes\n", runs.size(), samples.size());
  return all_converged ? kOk : kCeiling;
}

// ---------------------------------------------------------------------------
// persist

/// Knot files, or tighten.json summaries standing for their samples.
std::vector<PolygonalKnot> load_samples(const std::vector<std::string>& files, Run& run) {
  std::vector<PolygonalKnot> out;
  for (const auto& f : files) {
    run.input(f);
    const Json j = io::read_json(f);
    if (j.is_object() && j.value("format", "") == "knotpersist/tighten") {
      for (const auto& s : io::detail::as_array(io::detail::field(j, "samples", f), f + ".samples")) {
        const auto ref = io::detail::as_string(io::detail::field(s, "ref", f), f + ".samples.ref");
        out.push_back(io::read_knot(fs::path(f).parent_path() / ref));
      }
    } else {
      out.push_back(io::knot_from_json(j, f));
    }
  }
  if (out.empty()) throw ValidationError("no samples");
  return out;
}

std::vector<double> make_grid(const io::RunConfig& c, double first_birth) {
  const double lo = c.grid_lo.value_or(first_birth);
  const double hi = c.grid_hi.value_or(2.0 * lo);
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw ValidationError("grid needs grid_lo < grid_hi");
  if (c.grid_steps == 0) throw ValidationError("grid_steps must be positive");
  std::vector<double> g(c.grid_steps + 1);
  for (std::size_t i = 0; i <= c.grid_steps; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(c.grid_steps);
  }
  g.back() = hi;
  return g;
}

int cmd_persist(const std::vector<std::string>& files, Run& run) {
  const auto& cfg = run.config;
  std::vector<NormalizedConfig> configs;
  for (const auto& k : load_samples(files, run)) configs.push_back(normalize_scale(k));
  for (const auto& c : configs) {
    if (c.fingerprint.determinant != configs.front().fingerprint.determinant) {
      throw ValidationError("inputs have different knot determinants");
    }
  }
  auto samples = deduplicate(std::move(configs), cfg.tighten.dedup_tol);
  const auto grid = make_grid(cfg, samples.front().ropelength);
  const MergeTree tree = merge_scan(std::move(samples), grid, cfg.persist);
  const auto msm = merge_scales(tree, cfg.persist.birth_tol);
  const auto filt = vr_filtration(msm);

  const std::string man = run.manifest_name();
  for (const auto& f : io::write_tree(run.path(""), tree, cfg.persist, man)) run.output(f);
  io::write_text(run.path("msm.csv"), io::msm_csv(msm, man));
  io::write_text(run.path("filtration.txt"), io::filtration_text(filt, cfg.max_dim, man));
  io::write_text(run.path("partitions.txt"), io::partitions_text(filt, man));
  for (const char* f : {"msm.csv", "filtration.txt", "partitions.txt"}) run.output(f);

  bool ceiling = false;
  Json comps = Json::array(), off = Json::array(), above = Json::array();
  for (std::size_t i = 0; i < msm.size(); ++i) {
    comps.push_back({{"id", msm.components[i]}, {"members", msm.members[i]}});
    for (std::size_t j = i + 1; j < msm.size(); ++j) {
      if (msm.above_ceiling[i][j]) {
        ceiling = true;
        above.push_back({msm.components[i], msm.components[j]});
      } else {
        off.push_back({{"a", msm.components[i]}, {"b", msm.components[j]}, {"mu", io::number(msm.mu[i][j])},
                       {"d_merge", io::number(msm.d_merge[i][j])}});
      }
    }
  }
  Json summary = io::detail::header("knotpersist/persist", man);
  summary["samples"] = tree.size();
  summary["first_birth"] = io::number(msm.lambda_birth);
  summary["nu_ideal"] = msm.size();
  summary["components"] = comps;
  summary["merges"] = off;
  summary["above_ceiling"] = above;
  summary["ceiling"] = io::number(tree.ceiling());
  summary["edges"] = tree.edges.size();
  summary["certified_paths"] = tree.paths.size();
  summary["thickness_slack"] = cfg.persist.thickness_slack;
  summary["birth_tol"] = cfg.persist.birth_tol;
  summary["betti_check"] = betti_check(filt).pass;
  io::write_json(run.path("persist.json"), summary);
  run.output("persist.json");
  run.finish();

  fmt::print("{} samples, first birth {}, nu_ideal {}, {} certified edges\n", tree.size(), io::num(msm.lambda_birth),
             msm.size(), tree.edges.size());
  if (ceiling) {
    fmt::print(stderr, "warning: {} component pairs not merged by the ceiling {}\n", above.size(),
               io::num(tree.ceiling()));
    return kCeiling;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// export

fs::path tree_file(const std::string& p) { return fs::is_directory(p) ? fs::path(p) / "tree.json" : fs::path(p); }

int cmd_export(const std::string& input, Run& run) {
  const fs::path file = tree_file(input);
  run.input(file.string());
  const auto tf = io::read_tree(file);
  if (const auto why = io::check_merge_log(tf.tree); !why.empty()) throw ValidationError(file.string() + ": " + why);
  const auto msm = merge_scales(tf.tree, tf.birth_tol);
  const auto filt = vr_filtration(msm);
  const std::string man = run.manifest_name();
  io::write_text(run.path("merge.svg"), svg::render(tf.tree, msm, filt, man));
  io::write_text(run.path("partitions.txt"), io::partitions_text(filt, man));
  run.output("merge.svg");
  run.output("partitions.txt");
  run.finish();
  fmt::print("{} nodes, {} ideal components, {} scales listed\n", tf.tree.size(), msm.size(), filt.scales.size());
  for (std::size_t s = 0; s < filt.scales.size(); ++s) {
    if (s > 0 && filt.partitions[s] == filt.partitions[s - 1]) continue;
    std::string line = io::num(filt.scales[s]);
    for (const auto& cls : filt.partitions[s]) {
      line += " {";
      for (std::size_t i = 0; i < cls.size(); ++i) line += (i ? " " : "") + std::to_string(filt.labels[cls[i]]);
      line += "}";
    }
    fmt::print("{}\n", line);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// validate

class Checks {
 public:
  void add(const std::string& name, const std::string& failure) {
    fmt::print("{} {}{}\n", failure.empty() ? "PASS" : "FAIL", name, failure.empty() ? "" : ": " + failure);
    ok_ = ok_ && failure.empty();
  }
  bool ok() const { return ok_; }

 private:
  bool ok_ = true;
};

std::string check_path_endpoints(const MergeTree& t, const MergeEdge& e) {
  const auto& p = t.paths.at(*e.path);
  if (t.samples.empty()) return {};
  const auto& a = t.samples[e.a];
  const auto& b = t.samples[e.b];
  if (p.determinant != a.fingerprint.determinant) return "determinant differs from the nodes";
  if (max_displacement(p.frames.front(), a.knot) > 1e-9) return "path does not start at node " + std::to_string(e.a);
  if (quotient_distance(p.frames.back(), b.knot) > 1e-9) return "path does not end at node " + std::to_string(e.b);
  return {};
}

void validate_tree(const fs::path& file, Checks& c) {
  const auto tf = io::read_tree(file);
  const auto& t = tf.tree;
  c.add("merge log replay", io::check_merge_log(t));
  c.add("edge monotonicity", check_edge_monotone(t));
  c.add("first birth", check_first_birth(t));
  if (!t.samples.empty()) {
    std::string why;
    for (std::size_t i = 0; i < t.size() && why.empty(); ++i) {
      if (std::abs(t.births[i] - t.samples[i].ropelength) > 1e-12 * t.births[i]) {
        why = "node " + std::to_string(i) + " birth differs from its knot's ropelength";
      }
    }
    c.add("births match knots", why);
  }
  std::size_t replayed = 0;
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    const auto& ed = t.edges[e];
    if (!ed.path) continue;
    const auto& ref = *tf.path_refs[e];
    const auto check = validate_path(t.paths[*ed.path], ed.scale);
    c.add("path " + ref, check.ok ? check_path_endpoints(t, ed) : check.failure);
    ++replayed;
  }
  fmt::print("{} certified paths replayed\n", replayed);

  const auto msm = merge_scales(t, tf.birth_tol);
  const fs::path dir = file.parent_path();
  if (fs::exists(dir / "msm.csv")) {
    const auto disk = io::read_msm(dir / "msm.csv");
    const auto bad = ultrametric_violation(disk.mu);
    c.add("msm ultrametric", bad ? fmt::format("triple ({}, {}, {})", (*bad)[0], (*bad)[1], (*bad)[2]) : "");
    c.add("msm matches tree",
          disk.mu == msm.mu && disk.components == msm.components && disk.lambda_birth == msm.lambda_birth
              ? ""
              : "matrix on disk differs from the one derived from tree.json");
  }
  if (fs::exists(dir / "filtration.txt") && fs::exists(dir / "partitions.txt")) {
    const auto ff = io::read_filtration(dir / "filtration.txt", dir / "partitions.txt");
    const auto rep = betti_check(ff.filtration);
    std::string why;
    for (const auto& s : rep.scales) {
      if (!s.pass && why.empty()) {
        why = "scale " + io::num(s.scale) +
              (s.witness ? fmt::format(": witness ({}, {}, {})", (*s.witness)[0], (*s.witness)[1], (*s.witness)[2])
                         : ": partition listing disagrees");
      }
    }
    if (!rep.pass && why.empty()) why = "scale and partition counts differ";
    c.add("filtration clique partition", why);
    c.add("filtration simplices", io::check_simplices(ff));
    c.add("filtration matches msm", ff.filtration.mu == msm.mu ? "" : "edge scales differ from the matrix");
  }
}

void validate_manifest(const fs::path& file, Checks& c) {
  const auto m = io::read_manifest(file);
  for (const auto& o : m.outputs) {
    const fs::path p = file.parent_path() / o.path;
    std::string why;
    if (!fs::exists(p)) why = "missing";
    else if (io::digest_file(p) != o.digest) why = "digest differs";
    c.add("output " + o.path, why);
  }
}

int cmd_validate(const std::string& input) {
  Checks c;
  const fs::path p = input;
  if (fs::is_directory(p) || p.filename() == "tree.json") {
    validate_tree(tree_file(input), c);
  } else if (p.extension() == ".jsonl") {
    const auto path = io::read_path(p);
    const auto check = validate_path(path);
    c.add("path " + input, check.failure);
  } else {
    const Json j = io::read_json(p);
    const std::string format = j.is_object() ? j.value("format", "") : "";
    if (format == io::kKnotFormat) {
      const auto m = io::analyze(io::knot_from_json(j, input));
      fmt::print("embedded, {} vertices, determinant {}\n", m.vertices, m.determinant);
      c.add("knot " + input, "");
    } else if (format == io::kTreeFormat) {
      validate_tree(p, c);
    } else if (format == io::kManifestFormat) {
      validate_manifest(p, c);
    } else {
      throw ValidationError(input + ": unrecognised file (knot, tree, manifest, or path archive expected)");
    }
  }
  return c.ok() ? kOk : kInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ideal-knot tightening and merge persistence"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed (overrides the config)");
  app.add_option("--threads", g.threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a seed knot");
  gen_cmd->add_option("kind", gen.kind, "ngon, torus, figure8 or perturb")->required();
  gen_cmd->add_option("-n,--n", gen.n, "vertex count")->capture_default_str();
  gen_cmd->add_option("--p", gen.p, "torus knot p")->capture_default_str();
  gen_cmd->add_option("--q", gen.q, "torus knot q")->capture_default_str();
  gen_cmd->add_option("--radius", gen.radius, "ngon circumradius")->capture_default_str();
  gen_cmd->add_option("--input", gen.input, "knot to perturb");
  gen_cmd->add_option("--eps", gen.eps, "perturbation radius")->capture_default_str();
  gen_cmd->add_option("--name", gen.name, "output file name")->capture_default_str();

  std::string analyze_file;
  auto* analyze_cmd = app.add_subcommand("analyze", "geometry and knot-type metrics of a knot file");
  analyze_cmd->add_option("knot", analyze_file)->required();

  std::vector<std::string> tighten_files;
  std::optional<std::size_t> restarts;
  auto* tighten_cmd = app.add_subcommand("tighten", "minimize ropelength from seed knots");
  tighten_cmd->add_option("seeds", tighten_files)->required();
  tighten_cmd->add_option("--restarts", restarts, "restarts per seed (overrides the config)");

  std::vector<std::string> persist_files;
  std::optional<double> grid_lo, grid_hi;
  std::optional<std::size_t> grid_steps;
  auto* persist_cmd = app.add_subcommand("persist", "merge scan over sampled minimizers");
  persist_cmd->add_option("samples", persist_files, "knot files or tighten.json summaries")->required();
  persist_cmd->add_option("--grid-lo", grid_lo);
  persist_cmd->add_option("--grid-hi", grid_hi);
  persist_cmd->add_option("--grid-steps", grid_steps);

  std::string export_input;
  auto* export_cmd = app.add_subcommand("export", "render the SVG and partition listing of a merge tree");
  export_cmd->add_option("tree", export_input, "tree.json or its directory")->required();

  std::string validate_input;
  auto* validate_cmd = app.add_subcommand("validate", "re-check a knot, path archive, tree or manifest from disk");
  validate_cmd->add_option("file", validate_input)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(validate_input);
    Run run(app.get_subcommands().front()->get_name(), std::vector<std::string>(argv + 1, argv + argc), g);
    if (gen_cmd->parsed()) return cmd_gen(gen, run);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze_file, run);
    if (tighten_cmd->parsed()) return cmd_tighten(tighten_files, restarts, run);
    if (persist_cmd->parsed()) {
      if (grid_lo) run.config.grid_lo = grid_lo;
      if (grid_hi) run.config.grid_hi = grid_hi;
      if (grid_steps) run.config.grid_steps = *grid_steps;
      return cmd_persist(persist_files, run);
    }
    if (export_cmd->parsed()) return cmd_export(export_input, run);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kInternal;
  }
  return kInternal;
}
