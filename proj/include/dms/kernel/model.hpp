#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dms/kernel/distribution.hpp"
#include "dms/kernel/sim_time.hpp"

namespace dms {

enum class BlockKind { Create, CreatePort, Process, Batch, Separate, PortSend, Dispose };

std::string_view to_string(BlockKind kind);

struct CreateParams {
  std::string entity_kind;
  Distribution interarrival = Distribution::constant(1.0);
  SimTime first_arrival{0.0};
  friend bool operator==(const CreateParams&, const CreateParams&) = default;
};

// Entry point for entities received from another LP. `source` is the sending
// LP id, which is also the label carried by its messages.
struct CreatePortParams {
  std::string source;
  std::string entity_kind;
  friend bool operator==(const CreatePortParams&, const CreatePortParams&) = default;
};

struct ProcessParams {
  std::string resource;
  Distribution service = Distribution::constant(0.0);
  std::optional<std::string> relabel;  // entity kind after service, if it changes
  friend bool operator==(const ProcessParams&, const ProcessParams&) = default;
};

struct BatchParams {
  std::uint64_t size = 1;
  friend bool operator==(const BatchParams&, const BatchParams&) = default;
};

struct SeparateParams {
  std::uint64_t added_units = 0;
  friend bool operator==(const SeparateParams&, const SeparateParams&) = default;
};

struct PortSendParams {
  std::string destination;
  friend bool operator==(const PortSendParams&, const PortSendParams&) = default;
};

struct DisposeParams {
  friend bool operator==(const DisposeParams&, const DisposeParams&) = default;
};

// Alternative order matches BlockKind.
using BlockParams = std::variant<CreateParams, CreatePortParams, ProcessParams, BatchParams, SeparateParams,
                                 PortSendParams, DisposeParams>;

struct BlockSpec {
  std::string id;
  BlockParams params;
  std::string next;  // empty for PortSend and Dispose

  BlockKind kind() const { return static_cast<BlockKind>(params.index()); }
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

inline bool has_successor(BlockKind kind) { return kind != BlockKind::PortSend && kind != BlockKind::Dispose; }

struct ResourceSpec {
  std::string id;
  std::uint32_t capacity = 1;
  friend bool operator==(const ResourceSpec&, const ResourceSpec&) = default;
};

// The block network of one LP.
struct LpModel {
  std::string lp_id;
  std::vector<ResourceSpec> resources;
  std::vector<BlockSpec> blocks;
  friend bool operator==(const LpModel&, const LpModel&) = default;
};

// What one kernel executes: a single LP in distributed runs, every LP of the
// scenario in the sequential oracle.
struct KernelModel {
  std::vector<LpModel> sections;
};

}  // namespace dms
