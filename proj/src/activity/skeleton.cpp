#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "dms/activity/partition.hpp"
#include "dms/scenario/scenario.hpp"

namespace dms::activity {
namespace {

// Flow labels are free text in activity models; block ids are not.
std::string sanitize(std::string_view text) {
  std::string out;
  for (char c : text) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ? c : '_';
  }
  return out.empty() ? "_" : out;
}

std::string entry_of(std::string_view leaf) { return fmt::format("{}.in", sanitize(leaf)); }

}  // namespace

LpSkeleton emit_skeleton(const ModelGraph& graph, const Partition& partition, std::size_t block_index) {
  const ValidationReport report = validate_partition(graph, partition);
  if (!report.valid()) {
    throw ActivityError(ActivityError::Code::InvalidPartition,
                        fmt::format("partition does not match the model: {}", report.violations.front().detail));
  }
  if (block_index >= partition.blocks.size()) {
    throw ActivityError(ActivityError::Code::InvalidPartition,
                        fmt::format("no block {} in a partition of {}", block_index, partition.blocks.size()));
  }
  std::map<std::string, std::string, std::less<>> lp_of;
  for (const LpBlock& b : partition.blocks) {
    for (const std::string& leaf : b.leaves) lp_of.emplace(leaf, b.id);
  }
  const LpBlock& self = partition.blocks[block_index];
  LpSkeleton sk;
  sk.model.lp_id = self.id;
  std::set<std::string> fed;  // entry blocks with at least one predecessor
  std::set<std::string> used_ids;
  auto unique_id = [&](std::string id) {
    std::string candidate = id;
    for (int n = 2; !used_ids.insert(candidate).second; ++n) candidate = fmt::format("{}.{}", id, n);
    return candidate;
  };
  for (const std::string& leaf : self.leaves) used_ids.insert(entry_of(leaf));

  for (const Arc& a : graph.arcs()) {
    const bool from_here = lp_of.at(a.from) == self.id, to_here = lp_of.at(a.to) == self.id;
    if (to_here && !from_here) {
      sk.incoming.push_back(a);
      const std::string id = unique_id(fmt::format("from.{}.{}", sanitize(lp_of.at(a.from)), sanitize(a.label)));
      const std::string sep = unique_id(fmt::format("sep.{}.{}", sanitize(lp_of.at(a.from)), sanitize(a.label)));
      sk.model.blocks.push_back({id, CreatePortParams{lp_of.at(a.from), sanitize(a.label)}, sep});
      sk.model.blocks.push_back({sep, SeparateParams{0}, entry_of(a.to)});
      fed.insert(entry_of(a.to));
    } else if (from_here && !to_here) {
      sk.outgoing.push_back(a);
    } else if (from_here && to_here) {
      fed.insert(entry_of(a.to));
    }
  }

  for (const std::string& leaf : self.leaves) {
    const std::string resource = fmt::format("res.{}", sanitize(leaf));
    sk.model.resources.push_back({resource, 1});
    std::vector<const Arc*> outputs;
    for (const Arc& a : graph.arcs()) {
      if (a.from == leaf) outputs.push_back(&a);
    }
    // One service step per output flow; a block has a single successor.
    auto target_of = [&](const Arc& a) {
      if (lp_of.at(a.to) == self.id) return entry_of(a.to);
      const std::string send = unique_id(fmt::format("to.{}.{}", sanitize(lp_of.at(a.to)), sanitize(a.label)));
      sk.model.blocks.push_back({send, PortSendParams{lp_of.at(a.to)}, ""});
      return send;
    };
    if (outputs.empty()) {
      const std::string done = unique_id(fmt::format("{}.done", sanitize(leaf)));
      sk.model.blocks.push_back({entry_of(leaf), ProcessParams{resource, Distribution::constant(0.0), std::nullopt}, done});
      sk.model.blocks.push_back({done, DisposeParams{}, ""});
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const Arc& a = *outputs[i];
      const std::string id = i == 0 ? entry_of(leaf) : unique_id(fmt::format("{}.{}", sanitize(leaf), sanitize(a.label)));
      const std::string next = target_of(a);
      sk.model.blocks.push_back({id, ProcessParams{resource, Distribution::constant(0.0), sanitize(a.label)}, next});
      if (i > 0) {
        const std::string src = unique_id(fmt::format("{}.src", id));
        sk.model.blocks.push_back({src, CreateParams{sanitize(leaf), Distribution::constant(1.0), SimTime{0.0}}, id});
      }
    }
    if (!fed.contains(entry_of(leaf))) {
      const std::string src = unique_id(fmt::format("{}.src", sanitize(leaf)));
      sk.model.blocks.push_back(
          {src, CreateParams{sanitize(leaf), Distribution::constant(1.0), SimTime{0.0}}, entry_of(leaf)});
    }
  }
  return sk;
}

std::string skeleton_text(const LpSkeleton& skeleton) {
  std::string out = fmt::format("# skeleton for LP {}: service times, interarrivals and capacities are placeholders\n",
                                skeleton.model.lp_id);
  for (const Arc& a : skeleton.incoming) out += fmt::format("# in:  {} -> {} ({})\n", a.from, a.to, a.label);
  for (const Arc& a : skeleton.outgoing) out += fmt::format("# out: {} -> {} ({})\n", a.from, a.to, a.label);
  out += save_lp(LpDecl{skeleton.model, SimTime{1.0}});
  return out;
}

}  // namespace dms::activity
