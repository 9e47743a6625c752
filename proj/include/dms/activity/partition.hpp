#pragma once

#include <map>
#include <string>
#include <vector>

#include "dms/activity/model_graph.hpp"
#include "dms/kernel/model.hpp"

namespace dms::activity {

struct LpBlock {
  std::string id;
  std::vector<std::string> leaves;  // sorted
  friend bool operator==(const LpBlock&, const LpBlock&) = default;
};

struct Partition {
  std::vector<LpBlock> blocks;  // canonical: ordered by smallest member
  std::size_t cut_weight = 0;
  friend bool operator==(const Partition&, const Partition&) = default;
};

// Leaf -> block index in [0, k). Leaves sharing an index stay together,
// leaves with different indices are kept apart.
using Pins = std::map<std::string, std::size_t>;

inline constexpr std::size_t kExactSearchLimit = 12;

// Number of arcs whose endpoints lie in different blocks.
std::size_t cut_weight(const ModelGraph& graph, const std::vector<LpBlock>& blocks);

// Exactly k non-empty blocks with minimum cut: exhaustive branch and bound up
// to kExactSearchLimit leaves, greedy merging plus move/swap local search
// above. Ties go to the lexicographically smallest canonical labelling.
// Throws ActivityError(Infeasible).
Partition partition(const ModelGraph& graph, std::size_t k, const Pins& pins = {});

// Builds a canonical Partition (sorted blocks, generated LP ids, computed cut)
// from groups of leaves.
Partition make_partition(const ModelGraph& graph, std::vector<std::vector<std::string>> groups);

struct Violation {
  enum class Kind { UncoveredLeaf, DuplicatedLeaf, UnknownLeaf, EmptyBlock, DuplicateLpId, CutMismatch };
  Kind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::size_t recomputed_cut = 0;
  bool valid() const { return violations.empty(); }
};

ValidationReport validate_partition(const ModelGraph& graph, const Partition& partition);

struct Mapping {
  std::vector<std::pair<std::string, std::string>> assignment;  // LP id -> host:port
  friend bool operator==(const Mapping&, const Mapping&) = default;
};

// Block i -> host i. Throws NotEnoughHosts, or InvalidPartition when the
// chosen hosts repeat.
Mapping map_to_workstations(const Partition& partition, const std::vector<std::string>& hosts);

// `lp <id>: a,b` lines, then `cut <n>`; `map <lp> -> host:port` lines.
std::string save_partition(const Partition& partition);
Partition parse_partition(std::string_view text);
std::string save_mapping(const Mapping& mapping);
Mapping parse_mapping(std::string_view text);

// Simulation skeleton for one LP of a partition.
struct LpSkeleton {
  LpModel model;
  std::vector<Arc> incoming;  // cut arcs entering this LP
  std::vector<Arc> outgoing;  // cut arcs leaving it
};

// Throws ActivityError(InvalidPartition) when the partition does not
// validate against the graph.
LpSkeleton emit_skeleton(const ModelGraph& graph, const Partition& partition, std::size_t block_index);

// Scenario-syntax fragment (lp/resource/block lines) with placeholder
// parameters.
std::string skeleton_text(const LpSkeleton& skeleton);

}  // namespace dms::activity
