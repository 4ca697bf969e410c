#pragma once

// SVG rendering of a merge tree: a barcode (one bar per node, from birth to
// the scale at which it merges into an elder class), a single-linkage
// dendrogram of the ideal components over mu, and the per-scale partition
// listing. Data attributes carry the exact values from the result files.

#include "knotpersist/io.hpp"
#include "knotpersist/persist.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace knotpersist::svg {

struct DendrogramNode {
  double scale = 0.0;  // lambda at which the children join; lambda_birth for leaves
  std::size_t left = 0, right = 0;
  std::size_t leaf = SIZE_MAX;  // vertex index for leaves
};

/// Single linkage over a merge-scale matrix. Leaves come first (node v is
/// vertex v); internal nodes follow in merge order. Returns the roots too.
struct Dendrogram {
  std::vector<DendrogramNode> nodes;
  std::vector<std::size_t> roots;
};

inline Dendrogram dendrogram(const std::vector<std::vector<double>>& mu, double lambda_birth) {
  const std::size_t k = mu.size();
  Dendrogram d;
  std::vector<std::size_t> top(k);  // current cluster node of each vertex's class
  std::vector<std::size_t> cls(k);
  for (std::size_t v = 0; v < k; ++v) {
    d.nodes.push_back({lambda_birth, 0, 0, v});
    top[v] = v;
    cls[v] = v;
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (std::isfinite(mu[i][j])) pairs.emplace_back(mu[i][j], i, j);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [s, i, j] : pairs) {
    const std::size_t a = cls[i], b = cls[j];
    if (a == b) continue;
    d.nodes.push_back({s, top[a], top[b], SIZE_MAX});
    const std::size_t keep = std::min(a, b), drop = std::max(a, b);
    for (auto& c : cls) {
      if (c == drop) c = keep;
    }
    top[keep] = d.nodes.size() - 1;
  }
  for (std::size_t v = 0; v < k; ++v) {
    if (cls[v] == v) d.roots.push_back(top[v]);
  }
  return d;
}

namespace detail {

struct Axis {
  double lo = 0.0, hi = 1.0;
  double x0 = 0.0, x1 = 1.0;
  double operator()(double s) const { return x0 + (std::min(s, hi) - lo) / (hi - lo) * (x1 - x0); }
};

inline std::string fmt4(double x) { return fmt::format("{:.6g}", x); }

inline std::string axis_svg(const Axis& ax, double y) {
  std::string out = fmt::format(R"(<line class="axis" x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="#444"/>)",
                                ax.x0, y, ax.x1, y) + "\n";
  for (int t = 0; t <= 4; ++t) {
    const double s = ax.lo + (ax.hi - ax.lo) * t / 4.0;
    out += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="10" text-anchor="middle">{}</text>)", ax(s), y + 14,
                       fmt4(s)) + "\n";
  }
  return out;
}

}  // namespace detail

/// Renders the three panels for a tree and its derived matrix and filtration.
inline std::string render(const MergeTree& t, const MergeScaleMatrix& m, const MergeFiltration& f,
                          std::string_view manifest = {}) {
  constexpr double kWidth = 760, kLeft = 110, kRight = 40, kRow = 18, kGap = 50;
  const std::size_t n = t.size();

  // Death of each node: the scale at which it is merged as the younger root.
  std::vector<double> death(n, kInf);
  for (const auto& ev : t.merges) death[ev.younger] = ev.scale;

  detail::Axis ax;
  ax.lo = *std::min_element(t.births.begin(), t.births.end());
  ax.hi = ax.lo;
  for (double b : t.births) ax.hi = std::max(ax.hi, b);
  for (const auto& ev : t.merges) ax.hi = std::max(ax.hi, ev.scale);
  if (std::isfinite(t.ceiling())) ax.hi = std::max(ax.hi, t.ceiling());
  if (!(ax.hi > ax.lo)) ax.hi = ax.lo + 1.0;
  ax.x0 = kLeft;
  ax.x1 = kWidth - kRight;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t.births[a] < t.births[b]; });

  const Dendrogram d = dendrogram(m.mu, m.lambda_birth);
  // Leaf rows follow a depth-first walk so the elbows do not cross.
  std::vector<double> row(d.nodes.size(), 0.0);
  std::size_t next_leaf = 0;
  auto place = [&](auto&& self, std::size_t id) -> void {
    const auto& nd = d.nodes[id];
    if (nd.leaf != SIZE_MAX) {
      row[id] = static_cast<double>(next_leaf++);
      return;
    }
    self(self, nd.left);
    self(self, nd.right);
    row[id] = 0.5 * (row[nd.left] + row[nd.right]);
  };
  for (std::size_t r : d.roots) place(place, r);

  const double bar_top = 50;
  const double bar_axis = bar_top + kRow * static_cast<double>(n) + 10;
  const double den_top = bar_axis + kGap;
  const double den_axis = den_top + kRow * static_cast<double>(m.size()) + 10;
  const double part_top = den_axis + kGap;
  const double height = part_top + 16.0 * static_cast<double>(f.scales.size() + 1) + 20;

  std::string out;
  out += R"(<?xml version="1.0" encoding="UTF-8"?>)";
  out += "\n";
  if (!manifest.empty()) out += fmt::format("<!-- manifest: {} -->\n", manifest);
  out += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}">)",
                     kWidth, height, kWidth, height);
  out += "\n<style>text{font-family:monospace}</style>\n";
  out += fmt::format(R"(<rect width="{:.0f}" height="{:.0f}" fill="white"/>)", kWidth, height) + "\n";

  // Barcode.
  out += R"(<g id="barcode">)";
  out += "\n";
  out += fmt::format(R"(<text x="10" y="{:.2f}" font-size="13">merge barcode ({} nodes, ceiling {})</text>)",
                     bar_top - 20, n, io::num(t.ceiling())) + "\n";
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    const double y = bar_top + kRow * static_cast<double>(r);
    const bool open = std::isinf(death[i]);
    const double end = open ? ax.hi : death[i];
    out += fmt::format(R"(<text x="10" y="{:.2f}" font-size="10">node {}</text>)", y + 10, i) + "\n";
    out += fmt::format(
        R"(<rect class="bar" data-node="{}" data-birth="{}" data-death="{}" x="{:.2f}" y="{:.2f}" width="{:.2f}" height="10" fill="{}"/>)",
        i, io::num(t.births[i]), open ? "open" : io::num(death[i]), ax(t.births[i]), y,
        std::max(1.0, ax(end) - ax(t.births[i])), open ? "#1f5fa8" : "#8fb3de");
    out += "\n";
  }
  out += detail::axis_svg(ax, bar_axis);
  out += "</g>\n";

  // Dendrogram of the ideal components.
  out += R"(<g id="dendrogram">)";
  out += "\n";
  out += fmt::format(R"(<text x="10" y="{:.2f}" font-size="13">ideal components (lambda_birth {})</text>)",
                     den_top - 20, io::num(m.lambda_birth)) + "\n";
  auto yrow = [&](std::size_t id) { return den_top + kRow * row[id] + 5; };
  for (std::size_t id = 0; id < d.nodes.size(); ++id) {
    const auto& nd = d.nodes[id];
    if (nd.leaf != SIZE_MAX) {
      out += fmt::format(R"(<text x="10" y="{:.2f}" font-size="10">component {}</text>)", yrow(id) + 4,
                         m.components[nd.leaf]) + "\n";
      out += fmt::format(R"(<circle class="leaf" data-component="{}" cx="{:.2f}" cy="{:.2f}" r="3"/>)",
                         m.components[nd.leaf], ax(nd.scale), yrow(id)) + "\n";
      continue;
    }
    const double x = ax(nd.scale);
    for (std::size_t c : {nd.left, nd.right}) {
      out += fmt::format(R"(<polyline fill="none" stroke="#333" points="{:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f}"/>)",
                         ax(d.nodes[c].scale), yrow(c), x, yrow(c), x, yrow(id)) + "\n";
    }
    out += fmt::format(R"(<circle class="internal" data-scale="{}" data-dmerge="{}" cx="{:.2f}" cy="{:.2f}" r="4" fill="#c0392b"/>)",
                       io::num(nd.scale), io::num(nd.scale - m.lambda_birth), x, yrow(id)) + "\n";
  }
  for (std::size_t r : d.roots) {
    out += fmt::format(R"(<line class="root" x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="#333" stroke-dasharray="4 3"/>)",
                       ax(d.nodes[r].scale), yrow(r), ax.x1, yrow(r)) + "\n";
  }
  out += detail::axis_svg(ax, den_axis);
  out += "</g>\n";

  // Partition listing.
  out += R"(<g id="partitions">)";
  out += "\n";
  out += fmt::format(R"(<text x="10" y="{:.2f}" font-size="13">merge classes per scale</text>)", part_top - 10) + "\n";
  for (std::size_t s = 0; s < f.scales.size(); ++s) {
    std::string line = io::num(f.scales[s]) + ":";
    for (const auto& cls : f.partitions[s]) {
      line += " {";
      for (std::size_t i = 0; i < cls.size(); ++i) line += (i ? " " : "") + std::to_string(f.labels[cls[i]]);
      line += "}";
    }
    out += fmt::format(R"(<text class="partition" x="10" y="{:.2f}" font-size="10">{}</text>)",
                       part_top + 16.0 * static_cast<double>(s + 1), line) + "\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace knotpersist::svg
