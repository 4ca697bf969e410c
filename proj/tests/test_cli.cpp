#include <gtest/gtest.h>

#include "knotpersist/io.hpp"
#include "knotpersist/seeds.hpp"

#include <fmt/format.h>

#include <regex>
#include <set>
#include <sys/wait.h>

using namespace knotpersist;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

fs::path work_dir() {
  static const fs::path p = [] {
    const fs::path d = fs::path(testing::TempDir()) / "knotpersist_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

Result cli(const std::string& args) {
  static int counter = 0;
  const auto base = work_dir() / fmt::format("call_{}", counter++);
  const std::string cmd =
      fmt::format("{} {} > {}.out 2> {}.err", KNOTPERSIST_CLI, args, base.string(), base.string());
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_text(base.string() + ".out");
  r.err = io::read_text(base.string() + ".err");
  return r;
}

std::string dir(const std::string& name) { return (work_dir() / name).string(); }

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) ++n;
  return n;
}

bool valid_xml(const std::string& file) {
  const std::string cmd = fmt::format(
      "python3 -c \"import sys, xml.etree.ElementTree as E; E.parse(sys.argv[1])\" {} > /dev/null 2>&1", file);
  return std::system(cmd.c_str()) == 0;
}

bool have_python() { return std::system("python3 -c \"import xml.etree.ElementTree\" > /dev/null 2>&1") == 0; }

/// Numeric values of data-* attributes in an SVG.
std::vector<double> data_values(const std::string& svg, const std::string& attr) {
  std::vector<double> out;
  const std::regex re(attr + "=\"([^\"]+)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    const std::string v = (*it)[1];
    if (v != "open") out.push_back(io::parse_num(v, attr));
  }
  return out;
}

}  // namespace

TEST(CliGen, HexagonAnalyze) {
  const auto out = dir("hex");
  ASSERT_EQ(cli(fmt::format("gen ngon --n 6 --out {} --name hex.json", out)).code, 0);
  const auto k = io::read_knot(out + "/hex.json");
  for (const auto& v : k.vertices()) EXPECT_NEAR(v.norm(), 1.0, 1e-15);
  const auto r = cli(fmt::format("analyze {}/hex.json --out {}", out, out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = io::metrics_from_json(io::read_json(out + "/hex.metrics.json"), "m");
  EXPECT_NEAR(m.ropelength, 6.9282, 1e-4);
  EXPECT_EQ(m.determinant, 1u);
  EXPECT_EQ(io::read_json(out + "/hex.metrics.json")["manifest"], "analyze.manifest.json");
}

TEST(CliGen, TorusTrefoil) {
  const auto out = dir("torus");
  ASSERT_EQ(cli(fmt::format("gen torus --p 2 --q 3 --n 64 --out {} --name t.json", out)).code, 0);
  ASSERT_EQ(cli(fmt::format("analyze {}/t.json --out {}", out, out)).code, 0);
  const auto m = io::metrics_from_json(io::read_json(out + "/t.metrics.json"), "m");
  EXPECT_EQ(m.determinant, 3u);
  EXPECT_GE(m.total_curvature, 4.0 * M_PI);
}

TEST(CliGen, PerturbAlwaysEmbeddedOrFails) {
  const auto out = dir("perturb");
  ASSERT_EQ(cli(fmt::format("gen ngon --n 12 --out {} --name base.json", out)).code, 0);
  for (double eps : {0.05, 0.3, 2.0}) {
    const auto r = cli(fmt::format("gen perturb --input {0}/base.json --eps {1} --seed 4 --out {0} --name p.json", out, eps));
    if (r.code == 0) {
      EXPECT_TRUE(is_embedded(io::read_knot(out + "/p.json")).embedded);
    } else {
      EXPECT_EQ(r.code, 2) << r.err;
      EXPECT_NE(r.err.find("100 attempts"), std::string::npos) << r.err;
    }
  }
}

TEST(CliErrors, ValidationExitCodes) {
  const auto out = dir("errors");
  EXPECT_EQ(cli(fmt::format("gen torus --p 2 --q 4 --out {}", out)).code, 2);
  EXPECT_EQ(cli(fmt::format("gen ngon --n 2 --out {}", out)).code, 2);
  EXPECT_EQ(cli(fmt::format("gen perturb --out {}", out)).code, 2);
  EXPECT_EQ(cli(fmt::format("analyze {}/missing.json --out {}", out, out)).code, 2);
  EXPECT_EQ(cli("no-such-command").code, 2);
  io::write_text(out + "/bad_config.json", R"({"max_iter": 3})");
  const auto r = cli(fmt::format("--config {0}/bad_config.json gen ngon --out {0}", out));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown config key"), std::string::npos) << r.err;

  io::write_text(out + "/bowtie.json",
                 R"({"format":"knotpersist/knot","version":1,"vertices":[[0,0,0],[1,1,0],[1,0,0],[0,1,0]]})");
  const auto b = cli(fmt::format("analyze {0}/bowtie.json --out {0}", out));
  EXPECT_EQ(b.code, 2);
  EXPECT_NE(b.err.find("edges 0 and 2"), std::string::npos) << b.err;

  io::write_text(out + "/broken.json", "{\n\"format\": \"knotpersist/knot\",\n\"vertices\": [[0, 0 0]]\n}");
  const auto p = cli(fmt::format("analyze {0}/broken.json --out {0}", out));
  EXPECT_EQ(p.code, 2);
  EXPECT_NE(p.err.find("line 3"), std::string::npos) << p.err;
}

TEST(CliPersist, MismatchedTypesRejected) {
  const auto out = dir("mixed");
  ASSERT_EQ(cli(fmt::format("gen ngon --n 32 --out {} --name u.json", out)).code, 0);
  ASSERT_EQ(cli(fmt::format("gen torus --n 64 --out {} --name t.json", out)).code, 0);
  const auto r = cli(fmt::format("persist {0}/u.json {0}/t.json --out {0}", out));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("determinant"), std::string::npos) << r.err;
}

TEST(CliPersist, SingleSampleGivesOneBar) {
  const auto out = dir("single");
  ASSERT_EQ(cli(fmt::format("gen ngon --n 24 --out {} --name u.json", out)).code, 0);
  ASSERT_EQ(cli(fmt::format("persist {0}/u.json --out {0}/p", out)).code, 0);
  ASSERT_EQ(cli(fmt::format("export {0}/p --out {0}/e", out)).code, 0);
  const auto svg = io::read_text(out + "/e/merge.svg");
  EXPECT_EQ(count(svg, "class=\"bar\""), 1u);
  const auto births = data_values(svg, "data-birth");
  ASSERT_EQ(births.size(), 1u);
  EXPECT_EQ(births[0], io::read_tree(out + "/p/tree.json").tree.births[0]);
  EXPECT_NEAR(births[0], 48.0 * std::tan(M_PI / 24.0), 1e-12);
}

TEST(CliExport, FigureThreeHistory) {
  const auto out = dir("fig3");
  const auto r = cli(fmt::format("export {}/fig3_tree.json --out {}", KNOTPERSIST_SAMPLES, out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto svg = io::read_text(out + "/merge.svg");
  EXPECT_EQ(count(svg, "class=\"internal\""), 2u);
  EXPECT_EQ(data_values(svg, "data-scale"), (std::vector<double>{2.0, 3.0}));
  EXPECT_EQ(count(svg, "class=\"bar\""), 3u);
  const auto listing = io::read_text(out + "/partitions.txt");
  EXPECT_NE(listing.find("1 {0} {1} {2}\n2 {0 1} {2}\n3 {0 1 2}\n"), std::string::npos) << listing;
  if (have_python()) EXPECT_TRUE(valid_xml(out + "/merge.svg"));
}

// gen -> perturb x8 -> tighten -> persist -> export -> validate, once for the suite.
class UnknotPipeline : public testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto out = dir("pipeline");
    ASSERT_EQ(cli(fmt::format("gen ngon --n 32 --out {} --name ngon.json", out)).code, 0);
    std::string seeds;
    for (std::uint64_t s = 0; s < 8; ++s) {
      const auto r = cli(fmt::format("gen perturb --input {0}/ngon.json --eps 0.02 --seed {1} --out {0} --name seed{2}.json",
                                     out, derive_seed(42, s), s));
      ASSERT_EQ(r.code, 0) << r.err;
      seeds += fmt::format(" {}/seed{}.json", out, s);
    }
    tighten_ = cli(fmt::format("tighten{} --out {}/tighten", seeds, out));
    persist_ = cli(fmt::format("persist {0}/tighten/tighten.json --grid-lo 6.3 --grid-hi 12.6 --out {0}/persist", out));
    export_ = cli(fmt::format("export {0}/persist --out {0}/export", out));
  }

  static inline Result tighten_, persist_, export_;
};

TEST_F(UnknotPipeline, OneIdealComponent) {
  ASSERT_EQ(tighten_.code, 0) << tighten_.err;
  ASSERT_EQ(persist_.code, 0) << persist_.err;
  const auto out = dir("pipeline");
  const auto summary = io::read_json(out + "/tighten/tighten.json");
  EXPECT_EQ(summary["runs"].size(), 8u);
  EXPECT_EQ(summary["samples"].size(), 1u);
  const auto p = io::read_json(out + "/persist/persist.json");
  EXPECT_EQ(p["nu_ideal"], 1);
  EXPECT_TRUE(p["merges"].empty());
  EXPECT_TRUE(p["above_ceiling"].empty());
  const auto msm = io::read_msm(out + "/persist/msm.csv");
  EXPECT_EQ(msm.size(), 1u);
}

TEST_F(UnknotPipeline, TracesRoundTrip) {
  const auto out = dir("pipeline");
  const auto summary = io::read_json(out + "/tighten/tighten.json");
  for (const auto& run : summary["runs"]) {
    const auto trace = io::read_trace(out + "/tighten/" + run["trace_ref"].get<std::string>());
    EXPECT_EQ(trace.size(), run["iterations"].get<std::size_t>());
    const auto knot = io::read_knot(out + "/tighten/" + run["final_ref"].get<std::string>());
    EXPECT_NEAR(ropelength(knot), run["ropelength"].get<double>(), 1e-12 * run["ropelength"].get<double>());
    EXPECT_LE(run["ropelength"].get<double>(), 1.02 * 64.0 * std::tan(M_PI / 32.0));
  }
}

TEST_F(UnknotPipeline, SingleBarValidSvg) {
  ASSERT_EQ(export_.code, 0) << export_.err;
  const auto out = dir("pipeline");
  const auto svg = io::read_text(out + "/export/merge.svg");
  EXPECT_EQ(count(svg, "class=\"bar\""), 1u);
  EXPECT_EQ(count(svg, "class=\"internal\""), 0u);
  if (have_python()) EXPECT_TRUE(valid_xml(out + "/export/merge.svg"));
  // Every number the SVG carries is one stored in tree.json.
  const auto tree = io::read_tree(out + "/persist/tree.json");
  std::set<double> known(tree.tree.births.begin(), tree.tree.births.end());
  for (const auto& m : tree.tree.merges) known.insert(m.scale);
  for (const char* attr : {"data-birth", "data-death", "data-scale"}) {
    for (double v : data_values(svg, attr)) EXPECT_TRUE(known.count(v)) << attr << " " << v;
  }
  EXPECT_NE(svg.find("<!-- manifest: export.manifest.json -->"), std::string::npos);
}

TEST_F(UnknotPipeline, ValidateReplaysFromDisk) {
  const auto out = dir("pipeline");
  const auto r = cli(fmt::format("validate {}/persist", out));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
  for (const char* m : {"tighten/tighten.manifest.json", "persist/persist.manifest.json", "export/export.manifest.json"}) {
    EXPECT_EQ(cli(fmt::format("validate {}/{}", out, m)).code, 0) << m;
  }
}

TEST_F(UnknotPipeline, EveryOutputNamesItsManifest) {
  const auto out = dir("pipeline");
  for (const char* cmd : {"tighten", "persist", "export"}) {
    const auto m = io::read_manifest(fmt::format("{}/{}/{}.manifest.json", out, cmd, cmd));
    EXPECT_EQ(m.command, cmd);
    EXPECT_FALSE(m.outputs.empty());
    for (const auto& o : m.outputs) {
      const auto text = io::read_text(fmt::format("{}/{}/{}", out, cmd, o.path));
      EXPECT_NE(text.find(fmt::format("{}.manifest.json", cmd)), std::string::npos) << o.path;
    }
  }
}

TEST_F(UnknotPipeline, RerunReproducesDigests) {
  const auto out = dir("pipeline");
  const auto r = cli(fmt::format("persist {0}/tighten/tighten.json --grid-lo 6.3 --grid-hi 12.6 --out {0}/persist_again", out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = io::read_manifest(out + "/persist/persist.manifest.json");
  const auto b = io::read_manifest(out + "/persist_again/persist.manifest.json");
  EXPECT_EQ(a.config, b.config);
  EXPECT_EQ(a.outputs, b.outputs);
}

// Several nodes with certified paths, then tampering caught by validate.
TEST(CliValidate, DetectsTampering) {
  const auto out = dir("tamper");
  std::string seeds;
  for (std::uint64_t s = 0; s < 3; ++s) {
    io::write_knot(fmt::format("{}/s{}.json", out, s),
                   normalize_scale(perturb(regular_polygon(24), 0.05, derive_seed(3, s))).knot);
    seeds += fmt::format(" {}/s{}.json", out, s);
  }
  io::write_text(out + "/cfg.json", R"({"dedup_tol": 0})");
  const auto r = cli(fmt::format("--config {0}/cfg.json persist{1} --out {0}/p", out, seeds));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tree = io::read_tree(out + "/p/tree.json");
  ASSERT_FALSE(tree.tree.paths.empty());
  EXPECT_EQ(cli(fmt::format("validate {}/p", out)).code, 0);

  const std::string archive = fmt::format("{}/p/{}", out, *tree.path_refs[0]);
  const std::string original = io::read_text(archive);
  auto lines = io::lines_of(original);
  auto frame = io::parse_json(lines.back(), "frame");
  frame["vertices"][0][0] = frame["vertices"][0][0].get<double>() + 0.75;
  lines.back() = frame.dump();
  std::string edited;
  for (const auto& l : lines) edited += l + "\n";
  io::write_text(archive, edited);
  const auto v = cli(fmt::format("validate {}/p", out));
  EXPECT_EQ(v.code, 2);
  EXPECT_NE(v.out.find("FAIL path"), std::string::npos) << v.out;
  EXPECT_EQ(cli(fmt::format("validate {}/p/persist.manifest.json", out)).code, 2);
  io::write_text(archive, original);

  auto rows = io::lines_of(io::read_text(out + "/p/msm.csv"));
  rows.back() = rows.back().substr(0, rows.back().rfind(',') + 1) + "1";
  std::string msm;
  for (const auto& l : rows) msm += l + "\n";
  io::write_text(out + "/p/msm.csv", msm);
  const auto w = cli(fmt::format("validate {}/p", out));
  EXPECT_EQ(w.code, 2);
  EXPECT_NE(w.out.find("FAIL msm"), std::string::npos) << w.out;
}
