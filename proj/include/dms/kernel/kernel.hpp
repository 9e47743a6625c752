#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dms/kernel/model.hpp"
#include "dms/kernel/report.hpp"
#include "dms/kernel/rng.hpp"
#include "dms/kernel/sim_time.hpp"

namespace dms {

using BlockIndex = std::size_t;
using EntityId = std::uint64_t;

class KernelError : public std::runtime_error {
 public:
  enum class Code { PastEvent, UnknownBlock, UnknownResource, InvalidModel, UnknownEntity };

  KernelError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Same-time ordering classes. Port releases sort last so that a message which
// reaches an LP at exactly its current time still executes in the position the
// sequential run would give it.
enum class EventClass : std::uint8_t { Departure = 0, Arrival = 1, PortRelease = 2 };

struct Event {
  SimTime time;
  EventClass priority = EventClass::Arrival;
  // Zero except for port releases, where it encodes (port, per-link message
  // sequence) so their order never depends on when the message was delivered.
  std::uint64_t order_key = 0;
  std::uint64_t seq = 0;
  BlockIndex target = 0;
  std::optional<EntityId> entity = std::nullopt;
};

// Strict total order on (time, priority, order_key, seq); seq counts per LP.
bool event_before(const Event& a, const Event& b);

struct Entity {
  EntityId id = 0;
  std::string kind;
  std::uint64_t units = 1;
  SimTime created_at;
};

struct PortSendRecord {
  SimTime time;
  std::string_view lp_id;
  std::string_view block_id;
  std::string_view destination;
  const Entity& entity;
};

struct TraceRecord {
  SimTime time;
  std::string lp_id;
  std::string block_id;
  std::string entity_kind;
  std::uint64_t units = 0;
  std::uint64_t seq = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// `t=<17 digits> lp=<id> block=<id> entity_kind=<label> units=<n> seq=<n>`
std::string format_trace_line(const TraceRecord& record);

// Single-threaded event-calendar engine running a block network.
class Kernel {
 public:
  using PortSink = std::function<void(const PortSendRecord&)>;
  using TraceSink = std::function<void(const TraceRecord&)>;

  // Resolves every block/resource reference; configuration errors throw
  // KernelError here rather than during the run.
  Kernel(KernelModel model, std::uint64_t master_seed);

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  void set_port_sink(PortSink sink) { port_sink_ = std::move(sink); }
  void set_trace_sink(TraceSink sink) { trace_sink_ = std::move(sink); }

  // Schedules the first arrival of every Create block.
  void start();

  void schedule(Event event);
  // Removes the minimum event and moves the clock to it.
  std::optional<Event> advance();
  void dispatch(const Event& event);
  // advance + dispatch; false when the calendar is empty.
  bool step();

  const Event* peek() const { return calendar_.empty() ? nullptr : &calendar_.front(); }
  std::span<const Event> pending() const { return calendar_; }

  // Moves an entity into a block at the current clock.
  void fire_block(BlockIndex block, EntityId entity);
  EntityId create_entity(std::string kind, std::uint64_t units);
  const Entity& entity(EntityId id) const;

  // Schedules the CreatePort `port` to inject one unit-entity at release_time.
  void release_port_entity(BlockIndex port, SimTime release_time, std::uint64_t link_seq);

  BlockIndex find_block(std::string_view lp_id, std::string_view block_id) const;
  // The CreatePort of `lp_id` fed by messages labelled `source`.
  std::optional<BlockIndex> find_port(std::string_view lp_id, std::string_view source) const;

  std::size_t block_count() const { return blocks_.size(); }
  const BlockSpec& block_spec(BlockIndex block) const { return *blocks_.at(block).spec; }
  const std::string& block_lp(BlockIndex block) const;
  // npos for PortSend/Dispose.
  BlockIndex successor(BlockIndex block) const { return blocks_.at(block).next; }

  // For every entity waiting in a resource queue, the Process block it waits at.
  std::vector<BlockIndex> waiting_blocks() const;

  SimTime clock() const { return clock_; }
  std::uint64_t events_executed() const { return executed_total_; }

  // Integrates statistics up to end_time and sets the clock there.
  void finish(SimTime end_time);
  LocalReport report(std::string_view lp_id) const;

  static constexpr BlockIndex npos = static_cast<BlockIndex>(-1);

 private:
  struct BatchAccumulator {
    std::string kind;
    std::uint64_t units = 0;
  };

  struct BlockState {
    const BlockSpec* spec = nullptr;
    std::size_t section = 0;
    std::size_t local_index = 0;
    BlockIndex next = npos;
    std::size_t resource = 0;  // Process only
    RandomStream rng{0};
    BatchAccumulator batch;
    BlockStats stats;
  };

  struct Waiting {
    EntityId entity;
    BlockIndex block;
  };

  struct ResourceState {
    std::string id;
    std::size_t section = 0;
    std::uint32_t capacity = 1;
    std::uint32_t in_service = 0;
    double busy_area = 0.0;
    SimTime last_change{0.0};
    std::uint64_t seizes = 0;
    std::deque<Waiting> queue;
  };

  struct Departure {
    std::uint64_t entities = 0;
    std::uint64_t units = 0;
  };

  struct Section {
    std::string lp_id;
    std::vector<std::size_t> resources;
    std::vector<BlockIndex> blocks;
    std::unordered_map<std::string, BlockIndex> block_by_id;
    std::unordered_map<std::string, std::size_t> resource_by_id;
    std::unordered_map<std::string, BlockIndex> port_by_source;
    std::map<std::string, Departure, std::less<>> departures;
    std::uint64_t executed = 0;
    std::uint64_t next_seq = 0;
  };

  void forward(BlockIndex from, EntityId entity);
  void seize(ResourceState& resource, BlockIndex block, EntityId entity);
  void account_busy(ResourceState& resource);
  Entity& mutable_entity(EntityId id);
  void emit_trace(const Event& event, BlockIndex block, const Entity& entity);

  KernelModel model_;
  std::vector<Section> sections_;
  std::vector<BlockState> blocks_;
  std::vector<ResourceState> resources_;
  std::unordered_map<EntityId, Entity> entities_;
  std::vector<Event> calendar_;  // binary min-heap under event_before

  SimTime clock_{0.0};
  EntityId next_entity_ = 1;
  std::uint64_t executed_total_ = 0;
  std::optional<SimTime> last_executed_;

  PortSink port_sink_;
  TraceSink trace_sink_;
};

}  // namespace dms
