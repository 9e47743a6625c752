#include "random_graph.hpp"

#include <limits>
#include <random>

#include <fmt/format.h>

namespace dms::testing {

using activity::Arc;
using activity::ArcRole;
using activity::ModelGraph;

ModelGraph random_graph(std::uint64_t seed, const RandomGraphOptions& o) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  ModelGraph g;
  g.add_activity("ROOT", "enterprise");
  const std::size_t n = pick(o.min_leaves, o.max_leaves);
  const std::size_t sections = pick(1, std::max<std::size_t>(1, n / 2));
  for (std::size_t s = 0; s < sections; ++s) g.add_activity(fmt::format("S{}", s), "section", "ROOT");
  std::vector<std::string> leaves;
  for (std::size_t i = 0; i < n; ++i) {
    // The first leaves seed one section each, so no section is left childless.
    leaves.push_back(fmt::format("a{:02}", i));
    g.add_activity(leaves.back(), "leaf", fmt::format("S{}", i < sections ? i : pick(0, sections - 1)));
  }
  std::size_t a = 0;
  if (o.connected) {
    for (std::size_t i = 1; i < n; ++i, ++a) {
      const std::size_t j = pick(0, i - 1);
      const bool forward = pick(0, 1) == 1;
      g.add_arc(Arc{leaves[forward ? j : i], leaves[forward ? i : j], static_cast<ArcRole>(pick(0, 3)),
                    fmt::format("f{}", a)});
    }
  }
  const std::size_t arcs = a + pick(0, o.max_arcs);
  for (; a < arcs && n > 1; ++a) {
    const std::size_t i = pick(0, n - 1);
    std::size_t j = pick(0, n - 2);
    if (j >= i) ++j;
    g.add_arc(Arc{leaves[i], leaves[j], static_cast<ArcRole>(pick(0, 3)), fmt::format("f{}", a)});
  }
  g.validate();
  return g;
}

BruteForce brute_force_partition(const ModelGraph& graph, std::size_t k) {
  const std::vector<std::string> leaves = graph.leaves();
  const std::size_t n = leaves.size();
  std::vector<std::size_t> labels(n, 0);
  std::size_t best_cut = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> best_labels;
  auto index = [&](const std::string& id) {
    return static_cast<std::size_t>(std::find(leaves.begin(), leaves.end(), id) - leaves.begin());
  };
  while (true) {
    std::vector<std::size_t> remap(k, k), canon(n);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (remap[labels[i]] == k) remap[labels[i]] = next++;
      canon[i] = remap[labels[i]];
    }
    if (next == k) {
      std::size_t cut = 0;
      for (const Arc& a : graph.arcs()) cut += labels[index(a.from)] != labels[index(a.to)] ? 1 : 0;
      if (cut < best_cut || (cut == best_cut && canon < best_labels)) {
        best_cut = cut;
        best_labels = canon;
      }
    }
    std::size_t pos = 0;
    while (pos < n && ++labels[pos] == k) labels[pos++] = 0;
    if (pos == n) break;
  }
  std::vector<std::vector<std::string>> groups(k);
  for (std::size_t i = 0; i < n; ++i) groups[best_labels[i]].push_back(leaves[i]);
  return BruteForce{best_cut, activity::make_partition(graph, std::move(groups))};
}

}  // namespace dms::testing
