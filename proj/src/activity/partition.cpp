#include "dms/activity/partition.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace dms::activity {
namespace {

using Labels = std::vector<std::size_t>;

// Leaves (sorted by id) and symmetric arc counts between them.
struct Problem {
  std::vector<std::string> leaves;
  std::vector<std::vector<std::size_t>> w;
  std::vector<long> pin;  // -1 when free, else pin group

  explicit Problem(const ModelGraph& graph) : leaves(graph.leaves()) {
    const std::size_t n = leaves.size();
    w.assign(n, std::vector<std::size_t>(n, 0));
    pin.assign(n, -1);
    for (const Arc& a : graph.arcs()) {
      const std::size_t i = index(a.from), j = index(a.to);
      ++w[i][j];
      ++w[j][i];
    }
  }

  std::size_t index(std::string_view leaf) const {
    auto it = std::lower_bound(leaves.begin(), leaves.end(), leaf);
    if (it == leaves.end() || *it != leaf) {
      throw ActivityError(ActivityError::Code::UnknownNode, fmt::format("'{}' is not a leaf activity", leaf));
    }
    return static_cast<std::size_t>(it - leaves.begin());
  }

  std::size_t size() const { return leaves.size(); }

  std::size_t cut(const Labels& labels) const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = i + 1; j < size(); ++j) {
        if (labels[i] != labels[j]) total += w[i][j];
      }
    }
    return total;
  }
};

// Relabels blocks by first appearance: the canonical form used for ties.
Labels canonical(const Labels& labels) {
  std::vector<std::size_t> map(labels.size() + 1, std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  Labels out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& m = map.at(labels[i]);
    if (m == std::numeric_limits<std::size_t>::max()) m = next++;
    out[i] = m;
  }
  return out;
}

class ExactSearch {
 public:
  ExactSearch(const Problem& p, std::size_t k, std::size_t pinned_groups)
      : p_(p), k_(k), pinned_(pinned_groups), labels_(p.size()) {
    free_after_.assign(p.size() + 1, 0);
    for (std::size_t i = p.size(); i-- > 0;) free_after_[i] = free_after_[i + 1] + (p.pin[i] < 0 ? 1 : 0);
  }

  Labels run() {
    dfs(0, 0, 0);
    return best_;
  }

 private:
  void dfs(std::size_t i, std::size_t opened, std::size_t cost) {
    if (found_ && cost > best_cost_) return;
    // Pinned groups are non-empty by construction; the free leaves left must
    // still be able to open the remaining blocks.
    if (free_after_[i] < k_ - pinned_ - opened) return;
    if (i == p_.size()) {
      Labels c = canonical(labels_);
      if (!found_ || cost < best_cost_ || (cost == best_cost_ && c < best_)) {
        found_ = true;
        best_cost_ = cost;
        best_ = std::move(c);
      }
      return;
    }
    auto extra = [&](std::size_t label) {
      std::size_t add = 0;
      for (std::size_t j = 0; j < i; ++j) {
        if (labels_[j] != label) add += p_.w[i][j];
      }
      return add;
    };
    if (p_.pin[i] >= 0) {
      const auto label = static_cast<std::size_t>(p_.pin[i]);
      labels_[i] = label;
      dfs(i + 1, opened, cost + extra(label));
      return;
    }
    const std::size_t in_use = pinned_ + opened;
    for (std::size_t label = 0; label < in_use; ++label) {
      labels_[i] = label;
      dfs(i + 1, opened, cost + extra(label));
    }
    if (in_use < k_) {
      labels_[i] = in_use;
      dfs(i + 1, opened + 1, cost + extra(in_use));
    }
  }

  const Problem& p_;
  std::size_t k_;
  std::size_t pinned_;
  Labels labels_;
  std::vector<std::size_t> free_after_;
  bool found_ = false;
  std::size_t best_cost_ = 0;
  Labels best_;
};

// Greedy agglomeration to k blocks, then first-improvement moves and swaps.
Labels heuristic(const Problem& p, std::size_t k) {
  const std::size_t n = p.size();
  // Start: pinned groups merged, every free leaf alone.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<long> group_pin;
  std::map<long, std::size_t> by_pin;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.pin[i] >= 0) {
      auto [it, fresh] = by_pin.emplace(p.pin[i], groups.size());
      if (fresh) {
        groups.emplace_back();
        group_pin.push_back(p.pin[i]);
      }
      groups[it->second].push_back(i);
    } else {
      groups.push_back({i});
      group_pin.push_back(-1);
    }
  }
  auto between = [&](std::size_t a, std::size_t b) {
    std::size_t total = 0;
    for (std::size_t i : groups[a]) {
      for (std::size_t j : groups[b]) total += p.w[i][j];
    }
    return total;
  };
  while (groups.size() > k) {
    std::size_t best_a = 0, best_b = 0, best_w = 0, best_size = std::numeric_limits<std::size_t>::max();
    bool any = false;
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        if (group_pin[a] >= 0 && group_pin[b] >= 0) continue;
        const std::size_t weight = between(a, b);
        const std::size_t size = groups[a].size() + groups[b].size();
        // Heaviest link first; among equals prefer the smaller merged block.
        if (!any || weight > best_w || (weight == best_w && size < best_size)) {
          any = true;
          best_a = a;
          best_b = b;
          best_w = weight;
          best_size = size;
        }
      }
    }
    groups[best_a].insert(groups[best_a].end(), groups[best_b].begin(), groups[best_b].end());
    if (group_pin[best_b] >= 0) group_pin[best_a] = group_pin[best_b];
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best_b));
    group_pin.erase(group_pin.begin() + static_cast<std::ptrdiff_t>(best_b));
  }

  Labels labels(n);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i : groups[g]) labels[i] = g;
    sizes[g] = groups[g].size();
  }

  // gain of moving i to block b = links(i, b) - links(i, own block)
  auto links = [&](std::size_t i, std::size_t b) {
    std::size_t total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && labels[j] == b) total += p.w[i][j];
    }
    return total;
  };
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i < n && !improved; ++i) {
      if (p.pin[i] >= 0 || sizes[labels[i]] == 1) continue;
      const std::size_t own = links(i, labels[i]);
      for (std::size_t b = 0; b < k; ++b) {
        if (b == labels[i] || links(i, b) <= own) continue;
        --sizes[labels[i]];
        ++sizes[b];
        labels[i] = b;
        improved = true;
        break;
      }
    }
    for (std::size_t i = 0; i < n && !improved; ++i) {
      if (p.pin[i] >= 0) continue;
      for (std::size_t j = i + 1; j < n && !improved; ++j) {
        if (p.pin[j] >= 0 || labels[i] == labels[j]) continue;
        const std::size_t a = labels[i], b = labels[j];
        // Swap gain, correcting for the i-j arcs that stay cut.
        const long before = static_cast<long>(links(i, a) + links(j, b));
        const long after = static_cast<long>(links(i, b) + links(j, a)) - 2 * static_cast<long>(p.w[i][j]);
        if (after > before) {
          labels[i] = b;
          labels[j] = a;
          improved = true;
        }
      }
    }
  }
  return canonical(labels);
}

Partition from_labels(const ModelGraph& graph, const Problem& p, const Labels& labels) {
  std::vector<std::vector<std::string>> groups;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (labels[i] >= groups.size()) groups.resize(labels[i] + 1);
    groups[labels[i]].push_back(p.leaves[i]);
  }
  return make_partition(graph, std::move(groups));
}

}  // namespace

std::size_t cut_weight(const ModelGraph& graph, const std::vector<LpBlock>& blocks) {
  std::map<std::string, std::size_t, std::less<>> where;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (const std::string& leaf : blocks[b].leaves) where.emplace(leaf, b);
  }
  std::size_t total = 0;
  for (const Arc& a : graph.arcs()) {
    auto from = where.find(a.from), to = where.find(a.to);
    if (from != where.end() && to != where.end() && from->second != to->second) ++total;
  }
  return total;
}

Partition make_partition(const ModelGraph& graph, std::vector<std::vector<std::string>> groups) {
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  Partition out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    LpBlock block;
    block.id = groups[i].size() == 1 ? groups[i].front() : fmt::format("lp{}", i);
    block.leaves = std::move(groups[i]);
    out.blocks.push_back(std::move(block));
  }
  out.cut_weight = cut_weight(graph, out.blocks);
  return out;
}

Partition partition(const ModelGraph& graph, std::size_t k, const Pins& pins) {
  Problem p(graph);
  const std::size_t n = p.size();
  if (k == 0 || k > n) {
    throw ActivityError(ActivityError::Code::Infeasible, fmt::format("cannot split {} leaves into {} blocks", n, k));
  }
  // Pin indices become labels 0..g-1 in index order.
  std::map<std::size_t, long> group_of;
  for (const auto& [leaf, index] : pins) {
    if (index >= k) {
      throw ActivityError(ActivityError::Code::Infeasible, fmt::format("'{}' pinned to block {} of {}", leaf, index, k));
    }
    group_of.emplace(index, 0);
  }
  long next = 0;
  for (auto& [index, group] : group_of) group = next++;
  for (const auto& [leaf, index] : pins) {
    std::size_t i;
    try {
      i = p.index(leaf);
    } catch (const ActivityError&) {
      throw ActivityError(ActivityError::Code::Infeasible, fmt::format("pinned activity '{}' is not a leaf", leaf));
    }
    p.pin[i] = group_of.at(index);
  }

  const Labels labels = n <= kExactSearchLimit ? ExactSearch(p, k, group_of.size()).run() : heuristic(p, k);
  return from_labels(graph, p, labels);
}

ValidationReport validate_partition(const ModelGraph& graph, const Partition& partition) {
  ValidationReport report;
  auto add = [&](Violation::Kind kind, std::string detail) { report.violations.push_back({kind, std::move(detail)}); };
  std::map<std::string, std::size_t> seen;
  std::set<std::string> ids;
  for (const LpBlock& b : partition.blocks) {
    if (!ids.insert(b.id).second) add(Violation::Kind::DuplicateLpId, fmt::format("LP id '{}' used twice", b.id));
    if (b.leaves.empty()) add(Violation::Kind::EmptyBlock, fmt::format("empty block '{}'", b.id));
    for (const std::string& leaf : b.leaves) {
      if (!graph.contains(leaf) || !graph.is_leaf(leaf)) {
        add(Violation::Kind::UnknownLeaf, fmt::format("'{}' in block '{}' is not a leaf activity", leaf, b.id));
      } else if (++seen[leaf] == 2) {
        add(Violation::Kind::DuplicatedLeaf, fmt::format("duplicated leaf '{}'", leaf));
      }
    }
  }
  for (const std::string& leaf : graph.leaves()) {
    if (!seen.contains(leaf)) add(Violation::Kind::UncoveredLeaf, fmt::format("uncovered leaf '{}'", leaf));
  }
  report.recomputed_cut = cut_weight(graph, partition.blocks);
  if (report.recomputed_cut != partition.cut_weight) {
    add(Violation::Kind::CutMismatch, fmt::format("cut mismatch: declared {}, recomputed {}", partition.cut_weight,
                                                  report.recomputed_cut));
  }
  return report;
}

Mapping map_to_workstations(const Partition& partition, const std::vector<std::string>& hosts) {
  if (hosts.size() < partition.blocks.size()) {
    throw ActivityError(ActivityError::Code::NotEnoughHosts,
                        fmt::format("{} LPs need {} workstations, only {} given", partition.blocks.size(),
                                    partition.blocks.size(), hosts.size()));
  }
  Mapping m;
  std::set<std::string> used;
  for (std::size_t i = 0; i < partition.blocks.size(); ++i) {
    if (!used.insert(hosts[i]).second) {
      throw ActivityError(ActivityError::Code::InvalidPartition,
                          fmt::format("workstation '{}' would host two LPs", hosts[i]));
    }
    m.assignment.emplace_back(partition.blocks[i].id, hosts[i]);
  }
  return m;
}

}  // namespace dms::activity
