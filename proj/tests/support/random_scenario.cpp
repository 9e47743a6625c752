#include "random_scenario.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>

namespace dms::testing {
namespace {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool chance(double p) { return real(0.0, 1.0) < p; }
  // Rounded to quarters so file round trips stay short.
  double quarter(double lo, double hi) { return std::round(real(lo, hi) * 4.0) / 4.0; }

  Distribution bounded_service() {
    const double lo = quarter(0.25, 2.0);
    switch (integer(0, 2)) {
      case 0:
        return Distribution::constant(lo);
      case 1:
        return Distribution::uniform(lo, lo + quarter(0.0, 3.0));
      default: {
        const double hi = lo + quarter(0.5, 3.0);
        return Distribution::triangular(lo, lo + (hi - lo) / 2.0, hi);
      }
    }
  }

  Distribution any_service() { return chance(0.3) ? Distribution::exponential(quarter(0.5, 2.0)) : bounded_service(); }

  Distribution interarrival() {
    return chance(0.5) ? Distribution::exponential(quarter(1.0, 4.0)) : Distribution::uniform(1.0, 1.0 + quarter(0.5, 4.0));
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

Scenario random_scenario(std::uint64_t seed, const RandomScenarioOptions& options) {
  Gen g(seed);
  Scenario s;
  s.name = fmt::format("random{}", seed);
  s.seed = seed * 7919 + 1;
  s.end_time = SimTime{options.end_time};
  const int n = g.integer(options.min_lps, options.max_lps);

  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(fmt::format("L{}", i));

  // Forward edges give a DAG; a cyclic topology adds at least one back edge.
  const double transfers[] = {0.0, 0.5, 2.0, 10.0};
  auto add_link = [&](int from, int to) {
    if (s.link(ids[from], ids[to])) return;
    s.links.push_back(LinkSpec{ids[from], ids[to], SimTime{transfers[g.integer(0, 3)]}});
  };
  for (int i = 0; i + 1 < n; ++i) add_link(i, i + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (g.chance(0.3)) add_link(i, j);
    }
  }
  if (options.cyclic) {
    const int to = g.integer(0, n - 2);
    const int from = g.integer(to + 1, n - 1);
    add_link(from, to);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        if (g.chance(0.15)) add_link(i, j);
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    LpDecl lp;
    lp.model.lp_id = ids[i];
    const int resources = g.integer(1, 3);
    for (int r = 0; r < resources; ++r) {
      lp.model.resources.push_back(ResourceSpec{fmt::format("r{}", r), static_cast<std::uint32_t>(g.integer(1, 2))});
    }
    auto resource = [&] { return fmt::format("r{}", g.integer(0, resources - 1)); };
    auto& blocks = lp.model.blocks;
    const auto outs = s.out_links(ids[i]);
    const auto ins = s.in_links(ids[i]);

    // One local product line per out-link, batched before shipping.
    for (const LinkSpec& l : outs) {
      const std::string p = "to" + l.to;
      blocks.push_back({"make" + l.to, CreateParams{"P" + ids[i], g.interarrival(), SimTime{g.quarter(0.0, 3.0)}},
                        "proc" + l.to});
      blocks.push_back({"proc" + l.to, ProcessParams{resource(), g.bounded_service(), std::nullopt}, "batch" + l.to});
      blocks.push_back({"batch" + l.to, BatchParams{static_cast<std::uint64_t>(g.integer(1, 4))}, p});
      blocks.push_back({p, PortSendParams{l.to}, {}});
    }
    // Inputs are rebuilt, processed, then either forwarded or disposed.
    for (const LinkSpec& l : ins) {
      const std::string tag = "from" + l.from;
      blocks.push_back({tag, CreatePortParams{l.from, "I" + l.from}, "sep" + l.from});
      blocks.push_back({"sep" + l.from, SeparateParams{static_cast<std::uint64_t>(g.integer(0, 3))}, "work" + l.from});
      const bool forward = !outs.empty() && g.chance(0.6);
      blocks.push_back({"work" + l.from,
                        ProcessParams{resource(), forward ? g.bounded_service() : g.any_service(),
                                      g.chance(0.3) ? std::optional<std::string>("W" + ids[i]) : std::nullopt},
                        forward ? "fwd" + l.from : "done" + l.from});
      if (forward) {
        blocks.push_back({"fwd" + l.from, PortSendParams{outs[g.integer(0, static_cast<int>(outs.size()) - 1)].to}, {}});
      } else {
        blocks.push_back({"done" + l.from, DisposeParams{}, {}});
      }
    }
    // An independent line with unbounded service, never shipped.
    blocks.push_back({"makeOwn", CreateParams{"Own" + ids[i], g.interarrival(), SimTime{0.0}}, "procOwn"});
    blocks.push_back({"procOwn", ProcessParams{resource(), g.any_service(), std::nullopt}, "shipOwn"});
    blocks.push_back({"shipOwn", DisposeParams{}, {}});

    const BlockKind source = ins.empty() ? BlockKind::Create : BlockKind::CreatePort;
    std::optional<double> minimum;
    for (const BlockSpec& b : blocks) {
      if (b.kind() != source) continue;
      if (auto bound = chain_bound(lp.model, b.id)) minimum = std::min(minimum.value_or(bound->hours), bound->hours);
    }
    lp.lookahead = SimTime{minimum.value_or(1.0)};
    s.lps.push_back(std::move(lp));
  }
  return s;
}

}  // namespace dms::testing
