#pragma once

// Text formats for knots, metrics, traces, configs, merge trees, certified
// paths, merge-scale matrices, filtrations and run manifests. CSV and line
// formats print floats with 17 significant digits; JSON numbers use the
// shortest representation that parses back to the same double.

#include "knotpersist/geometry.hpp"
#include "knotpersist/knotid.hpp"
#include "knotpersist/normalize.hpp"
#include "knotpersist/optimize.hpp"
#include "knotpersist/persist.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace knotpersist::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kAboveCeiling = ">ceiling";

/// 17 significant digits; non-finite values print as inf, -inf or nan.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", x);
}

inline double parse_num(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double x = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
    throw ValidationError(where + ": expected a number, got '" + std::string(s) + "'");
  }
  return x;
}

inline std::size_t parse_index(std::string_view s, const std::string& where) {
  std::size_t x = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
    throw ValidationError(where + ": expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return x;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError(p.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, std::string_view text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error(p.string() + ": write failed");
}

/// Splits on '\n'; "file:line" positions are 1-based.
inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (std::size_t start = 0;;) {
    const std::size_t at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) return out;
    start = at + 1;
  }
}

inline std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  for (auto w : split(s, ' ')) {
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

/// FNV-1a over the file bytes, as 16 hex digits.
inline std::string digest_file(const fs::path& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : read_text(p)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

// ---------------------------------------------------------------------------
// JSON helpers

inline Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline Json read_json(const fs::path& p) { return parse_json(read_text(p), p.string()); }

inline void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

/// Finite doubles become JSON numbers, the rest strings ("inf", ...).
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(num(x)); }

namespace detail {

inline const Json& field(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ValidationError(where + ": missing field '" + key + "'");
  return *it;
}

inline double as_double(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf" || s == "-inf" || s == "nan") return parse_num(s, where);
  }
  throw ValidationError(where + ": expected a number");
}

inline std::uint64_t as_u64(const Json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ValidationError(where + ": expected a non-negative integer");
}

inline std::size_t as_size(const Json& j, const std::string& where) { return static_cast<std::size_t>(as_u64(j, where)); }

inline bool as_bool(const Json& j, const std::string& where) {
  if (!j.is_boolean()) throw ValidationError(where + ": expected true or false");
  return j.get<bool>();
}

inline std::string as_string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw ValidationError(where + ": expected a string");
  return j.get<std::string>();
}

inline std::optional<std::string> as_ref(const Json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  return as_string(j, where);
}

inline const Json& as_array(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array");
  return j;
}

inline Json header(std::string_view format, std::string_view manifest) {
  Json j;
  j["format"] = std::string(format);
  j["version"] = kFormatVersion;
  j["manifest"] = manifest.empty() ? Json(nullptr) : Json(std::string(manifest));
  return j;
}

inline void require_format(const Json& j, std::string_view format, const std::string& where) {
  const auto got = as_string(field(j, "format", where), where + ".format");
  if (got != format) throw ValidationError(where + ": expected format '" + std::string(format) + "', got '" + got + "'");
  const auto v = as_u64(field(j, "version", where), where + ".version");
  if (v != kFormatVersion) throw ValidationError(where + ": unsupported version " + std::to_string(v));
}

inline std::string comment_manifest(std::string_view manifest) {
  return manifest.empty() ? std::string{} : "# manifest: " + std::string(manifest) + "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Knots

inline Json vertices_json(const PolygonalKnot& k) {
  Json v = Json::array();
  for (const auto& x : k.vertices()) v.push_back({x.x(), x.y(), x.z()});
  return v;
}

inline PolygonalKnot vertices_from_json(const Json& j, const std::string& where) {
  detail::as_array(j, where);
  std::vector<Vec3> v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    const Json& row = j[i];
    if (!row.is_array() || row.size() != 3) throw ValidationError(at + ": expected [x, y, z]");
    Vec3 x;
    for (int c = 0; c < 3; ++c) x[c] = detail::as_double(row[static_cast<std::size_t>(c)], at + "[" + std::to_string(c) + "]");
    v.push_back(x);
  }
  try {
    return PolygonalKnot(std::move(v));
  } catch (const GeometryError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline constexpr std::string_view kKnotFormat = "knotpersist/knot";

inline Json knot_json(const PolygonalKnot& k, std::string_view manifest = {}) {
  Json j = detail::header(kKnotFormat, manifest);
  j["vertices"] = vertices_json(k);
  return j;
}

inline PolygonalKnot knot_from_json(const Json& j, const std::string& where) {
  detail::require_format(j, kKnotFormat, where);
  return vertices_from_json(detail::field(j, "vertices", where), where + ".vertices");
}

inline void write_knot(const fs::path& p, const PolygonalKnot& k, std::string_view manifest = {}) {
  write_json(p, knot_json(k, manifest));
}

inline PolygonalKnot read_knot(const fs::path& p) { return knot_from_json(read_json(p), p.string()); }

/// Sample knots are stored at thickness 1; the derived fields are recomputed.
inline NormalizedConfig as_config(PolygonalKnot k) {
  NormalizedConfig c{std::move(k), 0.0, 0.0, {}};
  c.length = length(c.knot);
  c.ropelength = c.length / thickness_value(c.knot);
  c.fingerprint = fingerprint(c.knot);
  return c;
}

// ---------------------------------------------------------------------------
// Metrics

struct KnotMetrics {
  std::size_t vertices = 0;
  double length = 0.0;
  double min_rad = kInf;
  std::size_t min_rad_vertex = 0;
  double dcsd = kInf;
  std::optional<std::pair<ArcPosition, ArcPosition>> dcsd_witness;
  double thickness = kInf;
  double ropelength = 0.0;
  double total_curvature = 0.0;
  std::uint64_t determinant = 1;
};

/// Throws ValidationError naming the offending edge pair for non-embedded input.
inline KnotMetrics analyze(const PolygonalKnot& k) {
  const auto e = is_embedded(k);
  if (!e.embedded) {
    if (e.witness) {
      throw ValidationError(fmt::format("not embedded: edges {} and {} meet (distance {})", e.witness->first,
                                        e.witness->second, num(e.witness_distance)));
    }
    throw ValidationError("not embedded: degenerate vertex " + std::to_string(e.degenerate_vertex.value_or(0)));
  }
  const auto t = thickness(k);
  KnotMetrics m;
  m.vertices = k.size();
  m.length = length(k);
  m.min_rad = t.min_rad;
  m.min_rad_vertex = t.min_rad_witness;
  m.dcsd = t.dcsd;
  m.dcsd_witness = t.dcsd_witness;
  m.thickness = t.thickness;
  m.ropelength = m.length / m.thickness;
  m.total_curvature = total_curvature(k);
  m.determinant = knot_determinant(k);
  return m;
}

inline constexpr std::string_view kMetricsFormat = "knotpersist/metrics";

inline Json metrics_json(const KnotMetrics& m, std::string_view manifest = {}) {
  Json j = detail::header(kMetricsFormat, manifest);
  j["vertices"] = m.vertices;
  j["length"] = number(m.length);
  j["min_rad"] = number(m.min_rad);
  j["min_rad_vertex"] = m.min_rad_vertex;
  j["dcsd"] = number(m.dcsd);
  if (m.dcsd_witness) {
    const auto& [p, q] = *m.dcsd_witness;
    j["dcsd_witness"] = {{{"edge", p.edge}, {"t", p.t}}, {{"edge", q.edge}, {"t", q.t}}};
  } else {
    j["dcsd_witness"] = nullptr;
  }
  j["thickness"] = number(m.thickness);
  j["ropelength"] = number(m.ropelength);
  j["total_curvature"] = number(m.total_curvature);
  j["determinant"] = m.determinant;
  return j;
}

inline KnotMetrics metrics_from_json(const Json& j, const std::string& where) {
  using namespace detail;
  require_format(j, kMetricsFormat, where);
  auto d = [&](const char* key) { return as_double(field(j, key, where), where + "." + key); };
  KnotMetrics m;
  m.vertices = as_size(field(j, "vertices", where), where + ".vertices");
  m.length = d("length");
  m.min_rad = d("min_rad");
  m.min_rad_vertex = as_size(field(j, "min_rad_vertex", where), where + ".min_rad_vertex");
  m.dcsd = d("dcsd");
  const Json& w = field(j, "dcsd_witness", where);
  if (!w.is_null()) {
    if (!w.is_array() || w.size() != 2) throw ValidationError(where + ".dcsd_witness: expected two positions");
    auto pos = [&](std::size_t i) {
      const std::string at = where + ".dcsd_witness[" + std::to_string(i) + "]";
      return ArcPosition{as_size(field(w[i], "edge", at), at + ".edge"), as_double(field(w[i], "t", at), at + ".t")};
    };
    m.dcsd_witness = std::pair{pos(0), pos(1)};
  }
  m.thickness = d("thickness");
  m.ropelength = d("ropelength");
  m.total_curvature = d("total_curvature");
  m.determinant = as_u64(field(j, "determinant", where), where + ".determinant");
  return m;
}

// ---------------------------------------------------------------------------
// Run configuration: one flat JSON object

struct RunConfig {
  TightenParams tighten;
  PersistParams persist;
  std::optional<double> grid_lo;  // default: smallest sample ropelength
  std::optional<double> grid_hi;  // default: twice grid_lo
  std::size_t grid_steps = 64;    // intervals; the grid has grid_steps + 1 scales
  std::size_t max_dim = 3;        // highest simplex dimension in filtration exports

  void set_seed(std::uint64_t s) { tighten.seed = persist.seed = s; }
  void set_threads(std::size_t n) { tighten.threads = persist.threads = n; }
};

inline Json config_json(const RunConfig& c) {
  const auto& t = c.tighten;
  const auto& p = c.persist;
  Json j;
  j["max_iters"] = t.max_iters;
  j["step_init"] = t.step_init;
  j["step_decay"] = t.step_decay;
  j["step_min"] = t.step_min;
  j["penalty_weight"] = t.penalty_weight;
  j["anneal_temp"] = t.anneal_temp;
  j["anneal_decay"] = t.anneal_decay;
  j["seed"] = t.seed;
  j["restarts"] = t.restarts;
  j["dedup_tol"] = t.dedup_tol;
  j["restart_perturbation"] = t.restart_perturbation;
  j["threads"] = t.threads;
  j["thickness_slack"] = p.thickness_slack;
  j["birth_tol"] = p.birth_tol;
  j["nearest"] = p.nearest;
  j["exhaustive_limit"] = p.exhaustive_limit;
  j["attempts"] = p.attempts;
  j["repair_sweeps"] = p.repair_sweeps;
  j["max_frames"] = p.max_frames;
  j["rescale_edges"] = p.rescale_edges;
  j["grid_lo"] = c.grid_lo ? Json(*c.grid_lo) : Json(nullptr);
  j["grid_hi"] = c.grid_hi ? Json(*c.grid_hi) : Json(nullptr);
  j["grid_steps"] = c.grid_steps;
  j["max_dim"] = c.max_dim;
  return j;
}

/// Starts from the defaults; absent keys keep them, unknown keys are errors.
inline RunConfig config_from_json(const Json& j, const std::string& where) {
  using namespace detail;
  if (!j.is_object()) throw ValidationError(where + ": config must be a JSON object");
  RunConfig c;
  auto& t = c.tighten;
  auto& p = c.persist;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const std::string at = where + "." + key;
    const Json& v = it.value();
    auto opt = [&]() -> std::optional<double> {
      if (v.is_null()) return std::nullopt;
      return as_double(v, at);
    };
    if (key == "max_iters") t.max_iters = as_size(v, at);
    else if (key == "step_init") t.step_init = as_double(v, at);
    else if (key == "step_decay") t.step_decay = as_double(v, at);
    else if (key == "step_min") t.step_min = as_double(v, at);
    else if (key == "penalty_weight") t.penalty_weight = as_double(v, at);
    else if (key == "anneal_temp") t.anneal_temp = as_double(v, at);
    else if (key == "anneal_decay") t.anneal_decay = as_double(v, at);
    else if (key == "seed") c.set_seed(as_u64(v, at));
    else if (key == "restarts") t.restarts = as_size(v, at);
    else if (key == "dedup_tol") t.dedup_tol = as_double(v, at);
    else if (key == "restart_perturbation") t.restart_perturbation = as_double(v, at);
    else if (key == "threads") c.set_threads(as_size(v, at));
    else if (key == "thickness_slack") p.thickness_slack = as_double(v, at);
    else if (key == "birth_tol") p.birth_tol = as_double(v, at);
    else if (key == "nearest") p.nearest = as_size(v, at);
    else if (key == "exhaustive_limit") p.exhaustive_limit = as_size(v, at);
    else if (key == "attempts") p.attempts = as_size(v, at);
    else if (key == "repair_sweeps") p.repair_sweeps = as_size(v, at);
    else if (key == "max_frames") p.max_frames = as_size(v, at);
    else if (key == "rescale_edges") p.rescale_edges = as_bool(v, at);
    else if (key == "grid_lo") c.grid_lo = opt();
    else if (key == "grid_hi") c.grid_hi = opt();
    else if (key == "grid_steps") c.grid_steps = as_size(v, at);
    else if (key == "max_dim") c.max_dim = as_size(v, at);
    else throw ValidationError(at + ": unknown config key");
  }
  return c;
}

inline RunConfig read_config(const fs::path& p) { return config_from_json(read_json(p), p.string()); }

// ---------------------------------------------------------------------------
// Tightening trace: CSV with header iter,ropelength,thickness,length

inline constexpr std::string_view kTraceHeader = "iter,ropelength,thickness,length";

inline std::string trace_csv(const std::vector<TraceRow>& trace, std::string_view manifest = {}) {
  std::string out = detail::comment_manifest(manifest);
  out += kTraceHeader;
  out += '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    out += fmt::format("{},{},{},{}\n", i, num(r.ropelength), num(r.thickness), num(r.length));
  }
  return out;
}

inline std::vector<TraceRow> trace_from_csv(const std::string& text, const std::string& source) {
  std::vector<TraceRow> out;
  bool header = false;
  const auto lines = lines_of(text);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const std::string at = source + ":" + std::to_string(l + 1);
    const auto& line = lines[l];
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kTraceHeader) throw ValidationError(at + ": expected header '" + std::string(kTraceHeader) + "'");
      header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw ValidationError(at + ": expected 4 columns");
    if (parse_index(cells[0], at + " iter") != out.size()) throw ValidationError(at + ": iter out of sequence");
    out.push_back({parse_num(cells[1], at + " ropelength"), parse_num(cells[2], at + " thickness"),
                   parse_num(cells[3], at + " length")});
  }
  if (!header) throw ValidationError(source + ": missing header");
  return out;
}

inline std::vector<TraceRow> read_trace(const fs::path& p) { return trace_from_csv(read_text(p), p.string()); }

// ---------------------------------------------------------------------------
// Certified paths: JSON lines, a certificate header then one frame per line

inline constexpr std::string_view kPathFormat = "knotpersist/path";

inline std::string path_jsonl(const CertifiedPath& path, std::string_view manifest = {}) {
  Json h = detail::header(kPathFormat, manifest);
  h["frames"] = path.frames.size();
  h["min_thickness"] = number(path.min_thickness);
  h["max_step"] = number(path.max_step);
  h["scale"] = number(path.scale);
  h["determinant"] = path.determinant;
  h["thickness_slack"] = number(path.thickness_slack);
  std::string out = h.dump() + "\n";
  for (std::size_t f = 0; f < path.frames.size(); ++f) {
    Json line;
    line["frame"] = f;
    line["vertices"] = vertices_json(path.frames[f]);
    out += line.dump() + "\n";
  }
  return out;
}

inline CertifiedPath path_from_jsonl(const std::string& text, const std::string& source) {
  using namespace detail;
  const auto lines = lines_of(text);
  if (lines.empty()) throw ValidationError(source + ": empty path archive");
  const std::string hat = source + ":1";
  const Json h = parse_json(lines[0], hat);
  require_format(h, kPathFormat, hat);
  CertifiedPath p;
  const std::size_t count = as_size(field(h, "frames", hat), hat + " frames");
  p.min_thickness = as_double(field(h, "min_thickness", hat), hat + " min_thickness");
  p.max_step = as_double(field(h, "max_step", hat), hat + " max_step");
  p.scale = as_double(field(h, "scale", hat), hat + " scale");
  p.determinant = as_u64(field(h, "determinant", hat), hat + " determinant");
  p.thickness_slack = as_double(field(h, "thickness_slack", hat), hat + " thickness_slack");
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    const std::string at = source + ":" + std::to_string(l + 1);
    const Json line = parse_json(lines[l], at);
    if (as_size(field(line, "frame", at), at + " frame") != p.frames.size()) {
      throw ValidationError(at + ": frame out of sequence");
    }
    p.frames.push_back(vertices_from_json(field(line, "vertices", at), at + " vertices"));
  }
  if (p.frames.size() != count) {
    throw ValidationError(source + ": header announces " + std::to_string(count) + " frames, found " +
                          std::to_string(p.frames.size()));
  }
  return p;
}

inline CertifiedPath read_path(const fs::path& p) { return path_from_jsonl(read_text(p), p.string()); }

// ---------------------------------------------------------------------------
// Merge trees: tree.json plus knots/ and paths/ beside it

inline constexpr std::string_view kTreeFormat = "knotpersist/tree";

struct TreeFile {
  MergeTree tree;
  double birth_tol = PersistParams{}.birth_tol;
  double thickness_slack = PersistParams{}.thickness_slack;
  std::vector<std::optional<std::string>> knot_refs;
  std::vector<std::optional<std::string>> path_refs;  // per edge
};

/// Writes tree.json into dir, with one knot file per sample and one archive
/// per certified edge. Returns the written paths relative to dir.
inline std::vector<std::string> write_tree(const fs::path& dir, const MergeTree& t, const PersistParams& params,
                                           std::string_view manifest = {}) {
  std::vector<std::string> written;
  Json j = detail::header(kTreeFormat, manifest);
  j["params"] = {{"birth_tol", params.birth_tol}, {"thickness_slack", params.thickness_slack}};
  Json grid = Json::array();
  for (double g : t.lambda_grid) grid.push_back(number(g));
  j["lambda_grid"] = grid;
  Json nodes = Json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    Json ref = nullptr;
    if (i < t.samples.size()) {
      const std::string name = fmt::format("knots/node_{:04d}.json", i);
      write_knot(dir / name, t.samples[i].knot, manifest);
      written.push_back(name);
      ref = name;
    }
    nodes.push_back({{"id", i}, {"birth", number(t.births[i])}, {"knot_ref", ref}});
  }
  j["nodes"] = nodes;
  Json edges = Json::array();
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    const auto& ed = t.edges[e];
    Json ref = nullptr;
    if (ed.path) {
      const std::string name = fmt::format("paths/edge_{:04d}.jsonl", e);
      write_text(dir / name, path_jsonl(t.paths.at(*ed.path), manifest));
      written.push_back(name);
      ref = name;
    }
    edges.push_back({{"a", ed.a}, {"b", ed.b}, {"scale", number(ed.scale)}, {"path_ref", ref}});
  }
  j["edges"] = edges;
  Json merges = Json::array();
  for (const auto& m : t.merges) merges.push_back({{"scale", number(m.scale)}, {"a", m.elder}, {"b", m.younger}});
  j["merges"] = merges;
  write_json(dir / "tree.json", j);
  written.insert(written.begin(), "tree.json");
  return written;
}

/// Loads the tree as stored; referenced knots and paths are read relative to
/// the tree file. Nothing is checked beyond the format itself.
inline TreeFile read_tree(const fs::path& file) {
  using namespace detail;
  const std::string src = file.string();
  const Json j = read_json(file);
  require_format(j, kTreeFormat, src);
  const fs::path dir = file.parent_path();
  TreeFile out;
  if (j.contains("params")) {
    const Json& p = j["params"];
    if (p.contains("birth_tol")) out.birth_tol = as_double(p["birth_tol"], src + ".params.birth_tol");
    if (p.contains("thickness_slack")) {
      out.thickness_slack = as_double(p["thickness_slack"], src + ".params.thickness_slack");
    }
  }
  MergeTree& t = out.tree;
  const Json& grid = as_array(field(j, "lambda_grid", src), src + ".lambda_grid");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    t.lambda_grid.push_back(as_double(grid[g], src + ".lambda_grid[" + std::to_string(g) + "]"));
  }
  knotpersist::detail::require_grid(t.lambda_grid);
  const Json& nodes = as_array(field(j, "nodes", src), src + ".nodes");
  if (nodes.empty()) throw ValidationError(src + ".nodes: no nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string at = src + ".nodes[" + std::to_string(i) + "]";
    if (as_size(field(nodes[i], "id", at), at + ".id") != i) throw ValidationError(at + ": ids must be 0, 1, 2, ...");
    t.births.push_back(as_double(field(nodes[i], "birth", at), at + ".birth"));
    out.knot_refs.push_back(as_ref(field(nodes[i], "knot_ref", at), at + ".knot_ref"));
  }
  const auto with_knots = std::count_if(out.knot_refs.begin(), out.knot_refs.end(), [](auto& r) { return r.has_value(); });
  if (with_knots != 0 && static_cast<std::size_t>(with_knots) != nodes.size()) {
    throw ValidationError(src + ".nodes: either every node or none has a knot_ref");
  }
  if (with_knots != 0) {
    for (const auto& ref : out.knot_refs) t.samples.push_back(as_config(read_knot(dir / *ref)));
  }
  const Json& edges = as_array(field(j, "edges", src), src + ".edges");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string at = src + ".edges[" + std::to_string(e) + "]";
    MergeEdge ed;
    ed.a = as_size(field(edges[e], "a", at), at + ".a");
    ed.b = as_size(field(edges[e], "b", at), at + ".b");
    if (ed.a >= ed.b || ed.b >= t.size()) throw ValidationError(at + ": need a < b < node count");
    ed.scale = as_double(field(edges[e], "scale", at), at + ".scale");
    const auto ref = as_ref(field(edges[e], "path_ref", at), at + ".path_ref");
    if (ref) {
      ed.path = t.paths.size();
      t.paths.push_back(read_path(dir / *ref));
    }
    out.path_refs.push_back(ref);
    if (!t.edges.empty() && std::tie(ed.scale, ed.a, ed.b) < std::tie(t.edges.back().scale, t.edges.back().a,
                                                                       t.edges.back().b)) {
      throw ValidationError(at + ": edges must be sorted by (scale, a, b)");
    }
    t.edges.push_back(ed);
  }
  const Json& merges = as_array(field(j, "merges", src), src + ".merges");
  for (std::size_t m = 0; m < merges.size(); ++m) {
    const std::string at = src + ".merges[" + std::to_string(m) + "]";
    MergeEvent ev;
    ev.scale = as_double(field(merges[m], "scale", at), at + ".scale");
    ev.elder = as_size(field(merges[m], "a", at), at + ".a");
    ev.younger = as_size(field(merges[m], "b", at), at + ".b");
    if (ev.elder >= t.size() || ev.younger >= t.size()) throw ValidationError(at + ": node out of range");
    t.merges.push_back(ev);
  }
  return out;
}

/// The stored merge log must equal the union-find replay of the edges.
inline std::string check_merge_log(const MergeTree& t) {
  knotpersist::detail::UnionFind uf(t.births);
  std::vector<MergeEvent> replay;
  for (const auto& e : t.edges) {
    if (const auto m = uf.unite(e.a, e.b)) replay.push_back({e.scale, m->first, m->second});
  }
  if (replay.size() != t.merges.size()) return "merge log has " + std::to_string(t.merges.size()) +
                                                " events, replay gives " + std::to_string(replay.size());
  for (std::size_t i = 0; i < replay.size(); ++i) {
    const auto& a = replay[i];
    const auto& b = t.merges[i];
    if (a.scale != b.scale || a.elder != b.elder || a.younger != b.younger) {
      return "merge " + std::to_string(i) + " disagrees with the replay";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Merge-scale matrix: CSV with metadata comments

inline std::string msm_csv(const MergeScaleMatrix& m, std::string_view manifest = {}) {
  std::string out = detail::comment_manifest(manifest);
  out += fmt::format("# lambda_birth={} ceiling={}\n", num(m.lambda_birth), num(m.ceiling));
  out += "# lambda_grid=";
  for (std::size_t g = 0; g < m.lambda_grid.size(); ++g) out += (g ? " " : "") + num(m.lambda_grid[g]);
  out += "\n# members=";
  for (std::size_t i = 0; i < m.members.size(); ++i) {
    if (i) out += " |";
    for (std::size_t v : m.members[i]) out += " " + std::to_string(v);
  }
  out += "\nid";
  for (std::size_t c : m.components) out += "," + std::to_string(c);
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += std::to_string(m.components[i]);
    for (std::size_t j = 0; j < m.size(); ++j) {
      out += ",";
      out += m.above_ceiling[i][j] ? std::string(kAboveCeiling) : num(m.mu[i][j]);
    }
    out += '\n';
  }
  return out;
}

inline MergeScaleMatrix msm_from_csv(const std::string& text, const std::string& source) {
  MergeScaleMatrix m;
  bool birth = false, grid = false, members = false, header = false;
  const auto lines = lines_of(text);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const std::string at = source + ":" + std::to_string(l + 1);
    const std::string_view line = lines[l];
    if (line.empty()) continue;
    if (line.starts_with("# lambda_birth=")) {
      const auto w = words(line.substr(2));
      if (w.size() != 2 || !w[1].starts_with("ceiling=")) throw ValidationError(at + ": malformed metadata");
      m.lambda_birth = parse_num(w[0].substr(13), at + " lambda_birth");
      m.ceiling = parse_num(w[1].substr(8), at + " ceiling");
      birth = true;
    } else if (line.starts_with("# lambda_grid=")) {
      for (auto w : words(line.substr(14))) m.lambda_grid.push_back(parse_num(w, at + " lambda_grid"));
      grid = true;
    } else if (line.starts_with("# members=")) {
      for (auto group : split(line.substr(10), '|')) {
        std::vector<std::size_t> g;
        for (auto w : words(group)) g.push_back(parse_index(w, at + " members"));
        if (g.empty()) throw ValidationError(at + ": empty member group");
        m.members.push_back(std::move(g));
      }
      members = true;
    } else if (line.front() == '#') {
      continue;
    } else if (!header) {
      const auto cells = split(line, ',');
      if (cells.empty() || cells[0] != "id") throw ValidationError(at + ": expected header starting with 'id'");
      for (std::size_t c = 1; c < cells.size(); ++c) m.components.push_back(parse_index(cells[c], at + " header"));
      header = true;
    } else {
      const auto cells = split(line, ',');
      const std::size_t i = m.mu.size();
      if (i >= m.components.size() || cells.size() != m.components.size() + 1) {
        throw ValidationError(at + ": row shape does not match the header");
      }
      if (parse_index(cells[0], at + " id") != m.components[i]) throw ValidationError(at + ": row id out of order");
      std::vector<double> row;
      std::vector<bool> above;
      for (std::size_t c = 1; c < cells.size(); ++c) {
        const bool flag = cells[c] == kAboveCeiling;
        above.push_back(flag);
        row.push_back(flag ? kInf : parse_num(cells[c], at + " column " + std::to_string(c)));
      }
      m.mu.push_back(std::move(row));
      m.above_ceiling.push_back(std::move(above));
    }
  }
  if (!birth || !grid || !members || !header) throw ValidationError(source + ": missing metadata or header");
  if (m.mu.size() != m.components.size() || m.members.size() != m.components.size()) {
    throw ValidationError(source + ": matrix is not square or members do not match the header");
  }
  const std::size_t k = m.size();
  m.d_merge.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) m.d_merge[i][j] = m.mu[i][j] - m.lambda_birth;
    }
  }
  return m;
}

inline MergeScaleMatrix read_msm(const fs::path& p) { return msm_from_csv(read_text(p), p.string()); }

// ---------------------------------------------------------------------------
// Filtrations: one simplex per line "scale v0 ... vk"

struct Simplex {
  double scale = 0.0;
  std::vector<std::size_t> vertices;
};

inline bool simplex_less(const Simplex& a, const Simplex& b) {
  if (a.scale != b.scale) return a.scale < b.scale;
  if (a.vertices.size() != b.vertices.size()) return a.vertices.size() < b.vertices.size();
  return a.vertices < b.vertices;
}

/// Simplices of dimension <= max_dim with a finite threshold, sorted by
/// (scale, dimension, vertex ids).
inline std::vector<Simplex> simplices(const MergeFiltration& f, std::size_t max_dim) {
  std::vector<Simplex> out;
  const std::size_t k = f.size();
  std::vector<std::size_t> sigma;
  auto grow = [&](auto&& self, std::size_t next) -> void {
    const double t = simplex_threshold(f, sigma);
    if (std::isinf(t)) return;  // every superset is infinite too
    out.push_back({t, sigma});
    if (sigma.size() > max_dim) return;
    for (std::size_t v = next; v < k; ++v) {
      sigma.push_back(v);
      self(self, v + 1);
      sigma.pop_back();
    }
  };
  for (std::size_t v = 0; v < k; ++v) {
    sigma = {v};
    grow(grow, v + 1);
  }
  std::sort(out.begin(), out.end(), simplex_less);
  return out;
}

inline std::string filtration_text(const MergeFiltration& f, std::size_t max_dim, std::string_view manifest = {}) {
  std::string out = detail::comment_manifest(manifest);
  out += fmt::format("# lambda_birth={} vertices={} max_dim={}\n", num(f.lambda_birth), f.size(), max_dim);
  out += "# labels=";
  for (std::size_t v = 0; v < f.size(); ++v) out += (v ? " " : "") + std::to_string(f.labels[v]);
  out += "\n# isolated=";
  for (std::size_t i = 0; i < f.isolated.size(); ++i) out += (i ? " " : "") + std::to_string(f.isolated[i]);
  out += '\n';
  for (const auto& s : simplices(f, max_dim)) {
    out += num(s.scale);
    for (std::size_t v : s.vertices) out += " " + std::to_string(v);
    out += '\n';
  }
  return out;
}

/// Fig.-3-style listing: "scale {0 1} {2}" per scanned scale.
inline std::string partitions_text(const MergeFiltration& f, std::string_view manifest = {}) {
  std::string out = detail::comment_manifest(manifest);
  out += "# scale followed by the merge classes of the vertices\n";
  for (std::size_t s = 0; s < f.scales.size(); ++s) {
    out += num(f.scales[s]);
    for (const auto& cls : f.partitions[s]) {
      out += " {";
      for (std::size_t i = 0; i < cls.size(); ++i) out += (i ? " " : "") + std::to_string(cls[i]);
      out += "}";
    }
    out += '\n';
  }
  return out;
}

struct FiltrationFile {
  MergeFiltration filtration;  // mu from the edges, scales and partitions from the listing
  std::vector<Simplex> simplices;
  std::size_t max_dim = 0;
};

inline FiltrationFile filtration_from_text(const std::string& filtration, const std::string& partitions,
                                           const std::string& source) {
  FiltrationFile out;
  MergeFiltration& f = out.filtration;
  bool meta = false;
  std::size_t k = 0;
  const auto lines = lines_of(filtration);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const std::string at = source + ":" + std::to_string(l + 1);
    const std::string_view line = lines[l];
    if (line.empty()) continue;
    if (line.starts_with("# lambda_birth=")) {
      const auto w = words(line.substr(2));
      if (w.size() != 3 || !w[1].starts_with("vertices=") || !w[2].starts_with("max_dim=")) {
        throw ValidationError(at + ": malformed metadata");
      }
      f.lambda_birth = parse_num(w[0].substr(13), at + " lambda_birth");
      k = parse_index(w[1].substr(9), at + " vertices");
      out.max_dim = parse_index(w[2].substr(8), at + " max_dim");
      f.mu.assign(k, std::vector<double>(k, kInf));
      for (std::size_t i = 0; i < k; ++i) f.mu[i][i] = f.lambda_birth;
      meta = true;
    } else if (line.starts_with("# labels=")) {
      for (auto w : words(line.substr(9))) f.labels.push_back(parse_index(w, at + " labels"));
    } else if (line.starts_with("# isolated=")) {
      for (auto w : words(line.substr(11))) f.isolated.push_back(parse_index(w, at + " isolated"));
    } else if (line.front() == '#') {
      continue;
    } else {
      if (!meta) throw ValidationError(at + ": simplex before the metadata line");
      const auto w = words(line);
      Simplex s;
      s.scale = parse_num(w.at(0), at + " scale");
      for (std::size_t i = 1; i < w.size(); ++i) {
        const std::size_t v = parse_index(w[i], at + " vertex");
        if (v >= k) throw ValidationError(at + ": vertex " + std::to_string(v) + " out of range");
        s.vertices.push_back(v);
      }
      if (s.vertices.empty()) throw ValidationError(at + ": simplex without vertices");
      if (s.vertices.size() == 2) f.mu[s.vertices[0]][s.vertices[1]] = f.mu[s.vertices[1]][s.vertices[0]] = s.scale;
      out.simplices.push_back(std::move(s));
    }
  }
  if (!meta) throw ValidationError(source + ": missing metadata line");
  if (f.labels.size() != k) throw ValidationError(source + ": labels do not match the vertex count");

  const std::string psrc = source + " partitions";
  const auto plines = lines_of(partitions);
  for (std::size_t l = 0; l < plines.size(); ++l) {
    const std::string at = psrc + ":" + std::to_string(l + 1);
    const std::string_view line = plines[l];
    if (line.empty() || line.front() == '#') continue;
    const std::size_t brace = line.find('{');
    f.scales.push_back(parse_num(line.substr(0, brace), at + " scale"));
    std::vector<std::vector<std::size_t>> classes;
    for (std::size_t pos = brace; pos != std::string_view::npos; pos = line.find('{', pos + 1)) {
      const std::size_t close = line.find('}', pos);
      if (close == std::string_view::npos) throw ValidationError(at + ": unbalanced braces");
      std::vector<std::size_t> cls;
      for (auto w : words(line.substr(pos + 1, close - pos - 1))) cls.push_back(parse_index(w, at + " vertex"));
      classes.push_back(std::move(cls));
    }
    f.partitions.push_back(std::move(classes));
  }
  return out;
}

inline FiltrationFile read_filtration(const fs::path& filtration, const fs::path& partitions) {
  return filtration_from_text(read_text(filtration), read_text(partitions), filtration.string());
}

/// Sort order, and every listed simplex at its pairwise-max threshold.
inline std::string check_simplices(const FiltrationFile& file) {
  for (std::size_t i = 0; i < file.simplices.size(); ++i) {
    const auto& s = file.simplices[i];
    if (i > 0 && !simplex_less(file.simplices[i - 1], s)) return "line order broken at simplex " + std::to_string(i);
    if (s.vertices.size() > file.max_dim + 1) return "simplex " + std::to_string(i) + " exceeds max_dim";
    if (simplex_threshold(file.filtration, s.vertices) != s.scale) {
      return "simplex " + std::to_string(i) + " is not at its pairwise-max threshold";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Run manifests

struct OutputDigest {
  std::string path;
  std::string digest;
  friend bool operator==(const OutputDigest&, const OutputDigest&) = default;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  Json config;
  std::vector<std::string> inputs;
  std::vector<OutputDigest> outputs;
  std::string version{kToolVersion};
  double wall_time_s = 0.0;
  std::uint64_t seed = 1;
};

inline constexpr std::string_view kManifestFormat = "knotpersist/manifest";

inline Json manifest_json(const RunManifest& m) {
  Json j = detail::header(kManifestFormat, {});
  j.erase("manifest");
  j["command"] = m.command;
  j["args"] = m.args;
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  Json outs = Json::array();
  for (const auto& o : m.outputs) outs.push_back({{"path", o.path}, {"digest", o.digest}});
  j["outputs"] = outs;
  j["tool_version"] = m.version;
  j["wall_time_s"] = m.wall_time_s;
  j["seed"] = m.seed;
  return j;
}

inline RunManifest manifest_from_json(const Json& j, const std::string& where) {
  using namespace detail;
  require_format(j, kManifestFormat, where);
  RunManifest m;
  m.command = as_string(field(j, "command", where), where + ".command");
  for (const auto& a : as_array(field(j, "args", where), where + ".args")) m.args.push_back(as_string(a, where + ".args"));
  m.config = field(j, "config", where);
  for (const auto& a : as_array(field(j, "inputs", where), where + ".inputs")) {
    m.inputs.push_back(as_string(a, where + ".inputs"));
  }
  for (const auto& o : as_array(field(j, "outputs", where), where + ".outputs")) {
    m.outputs.push_back({as_string(field(o, "path", where), where + ".outputs"),
                         as_string(field(o, "digest", where), where + ".outputs")});
  }
  m.version = as_string(field(j, "tool_version", where), where + ".tool_version");
  m.wall_time_s = as_double(field(j, "wall_time_s", where), where + ".wall_time_s");
  m.seed = as_u64(field(j, "seed", where), where + ".seed");
  return m;
}

inline RunManifest read_manifest(const fs::path& p) { return manifest_from_json(read_json(p), p.string()); }

}  // namespace knotpersist::io
