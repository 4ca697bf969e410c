// Ropelength of regular n-gons against 2*pi, then a short tightening run
// from a perturbed 32-gon and the merge classes of a three-node history.

#include "knotpersist/optimize.hpp"
#include "knotpersist/persist.hpp"
#include "knotpersist/seeds.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

using namespace knotpersist;

int main() {
  for (std::size_t n : {8, 16, 32, 64, 96, 192}) {
    const double rop = ropelength(regular_polygon(n));
    fmt::print("n = {:3d}  ropelength {:.12f}  excess over 2pi {:.3e}\n", n, rop, rop / (2.0 * M_PI) - 1.0);
  }

  TightenParams params;
  params.max_iters = 300;
  const auto run = tighten(perturb(regular_polygon(32), 0.02, std::uint64_t{1}), params);
  fmt::print("tightened perturbed 32-gon: ropelength {:.6f} after {} sweeps (regular value {:.6f})\n",
             run.final.ropelength, run.iterations, ropelength(regular_polygon(32)));

  const auto tree = build_tree({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, {{0, 1, 2.0, {}}, {1, 2, 3.0, {}}});
  const auto filt = vr_filtration(merge_scales(tree, 0.0));
  for (std::size_t s = 0; s < filt.scales.size(); ++s) {
    fmt::print("scale {}:", filt.scales[s]);
    for (const auto& cls : filt.partitions[s]) fmt::print(" {{{}}}", fmt::join(cls, " "));
    fmt::print("\n");
  }
  return 0;
}
