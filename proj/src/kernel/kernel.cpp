#include "dms/kernel/kernel.hpp"

#include <algorithm>
#include <cassert>

#include <fmt/format.h>

namespace dms {
namespace {

// Heap comparator: `a` sinks below `b` when it executes later.
bool executes_later(const Event& a, const Event& b) { return event_before(b, a); }

constexpr unsigned kLinkSeqBits = 40;
constexpr std::uint64_t kPortReleaseSeq = std::uint64_t{1} << 63;

}  // namespace

bool event_before(const Event& a, const Event& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.priority != b.priority) return a.priority < b.priority;
  if (a.order_key != b.order_key) return a.order_key < b.order_key;
  if (a.seq != b.seq) return a.seq < b.seq;
  // Only reachable across LP sections of a flattened kernel.
  return a.target < b.target;
}

std::string format_trace_line(const TraceRecord& r) {
  return fmt::format("t={} lp={} block={} entity_kind={} units={} seq={}", format_time(r.time), r.lp_id, r.block_id,
                     r.entity_kind, r.units, r.seq);
}

Kernel::Kernel(KernelModel model, std::uint64_t master_seed) : model_(std::move(model)) {
  sections_.resize(model_.sections.size());
  for (std::size_t s = 0; s < model_.sections.size(); ++s) {
    const LpModel& lp = model_.sections[s];
    Section& section = sections_[s];
    section.lp_id = lp.lp_id;
    for (const ResourceSpec& r : lp.resources) {
      if (r.capacity < 1) {
        throw KernelError(KernelError::Code::InvalidModel,
                          fmt::format("resource {}/{} has capacity 0", lp.lp_id, r.id));
      }
      if (!section.resource_by_id.emplace(r.id, resources_.size()).second) {
        throw KernelError(KernelError::Code::InvalidModel, fmt::format("duplicate resource {}/{}", lp.lp_id, r.id));
      }
      section.resources.push_back(resources_.size());
      ResourceState state;
      state.id = r.id;
      state.section = s;
      state.capacity = r.capacity;
      resources_.push_back(std::move(state));
    }
    for (std::size_t i = 0; i < lp.blocks.size(); ++i) {
      const BlockSpec& spec = lp.blocks[i];
      if (!section.block_by_id.emplace(spec.id, blocks_.size()).second) {
        throw KernelError(KernelError::Code::InvalidModel, fmt::format("duplicate block {}/{}", lp.lp_id, spec.id));
      }
      section.blocks.push_back(blocks_.size());
      BlockState state;
      state.spec = &spec;
      state.section = s;
      state.local_index = i;
      state.rng = RandomStream(master_seed, lp.lp_id, spec.id);
      state.stats.id = spec.id;
      state.stats.kind = spec.kind();
      blocks_.push_back(std::move(state));
    }
  }

  // Second pass: successors, resources, ports.
  for (BlockState& block : blocks_) {
    Section& section = sections_[block.section];
    const BlockSpec& spec = *block.spec;
    if (has_successor(spec.kind())) {
      auto it = section.block_by_id.find(spec.next);
      if (it == section.block_by_id.end()) {
        throw KernelError(KernelError::Code::UnknownBlock,
                          fmt::format("block {}/{}: unknown successor '{}'", section.lp_id, spec.id, spec.next));
      }
      block.next = it->second;
    }
    if (const auto* p = std::get_if<ProcessParams>(&spec.params)) {
      auto it = section.resource_by_id.find(p->resource);
      if (it == section.resource_by_id.end()) {
        throw KernelError(KernelError::Code::UnknownResource,
                          fmt::format("block {}/{}: unknown resource '{}'", section.lp_id, spec.id, p->resource));
      }
      block.resource = it->second;
    }
    if (const auto* p = std::get_if<CreatePortParams>(&spec.params)) {
      if (!section.port_by_source.emplace(p->source, section.block_by_id.at(spec.id)).second) {
        throw KernelError(KernelError::Code::InvalidModel,
                          fmt::format("LP {} has two ports for source '{}'", section.lp_id, p->source));
      }
    }
  }
}

void Kernel::start() {
  for (BlockIndex b = 0; b < blocks_.size(); ++b) {
    if (const auto* p = std::get_if<CreateParams>(&blocks_[b].spec->params)) {
      schedule(Event{.time = p->first_arrival, .priority = EventClass::Arrival, .target = b});
    }
  }
}

void Kernel::schedule(Event event) {
  if (event.time < clock_) {
    throw KernelError(KernelError::Code::PastEvent, fmt::format("event at t={} scheduled in the past (clock={})",
                                                                format_time(event.time), format_time(clock_)));
  }
  Section& section = sections_[blocks_.at(event.target).section];
  // Port releases are numbered from their order key, not the LP counter, so
  // the moment a message is delivered never shifts later sequence numbers.
  event.seq = event.priority == EventClass::PortRelease ? (kPortReleaseSeq | event.order_key) : section.next_seq++;
  calendar_.push_back(std::move(event));
  std::push_heap(calendar_.begin(), calendar_.end(), executes_later);
}

std::optional<Event> Kernel::advance() {
  if (calendar_.empty()) return std::nullopt;
  std::pop_heap(calendar_.begin(), calendar_.end(), executes_later);
  Event event = std::move(calendar_.back());
  calendar_.pop_back();
  // Guaranteed by schedule(); a failure here means the heap is corrupt.
  assert(!last_executed_ || *last_executed_ <= event.time);
  clock_ = event.time;
  last_executed_ = event.time;
  return event;
}

bool Kernel::step() {
  auto event = advance();
  if (!event) return false;
  dispatch(*event);
  return true;
}

void Kernel::dispatch(const Event& event) {
  BlockState& block = blocks_.at(event.target);
  ++executed_total_;
  ++sections_[block.section].executed;

  switch (block.spec->kind()) {
    case BlockKind::Create: {
      const auto& p = std::get<CreateParams>(block.spec->params);
      const SimTime gap{p.interarrival.sample(block.rng)};
      schedule(Event{.time = clock_ + gap, .priority = EventClass::Arrival, .target = event.target});
      const EntityId id = create_entity(p.entity_kind, 1);
      emit_trace(event, event.target, entity(id));
      fire_block(event.target, id);
      break;
    }
    case BlockKind::CreatePort: {
      const auto& p = std::get<CreatePortParams>(block.spec->params);
      const EntityId id = create_entity(p.entity_kind, 1);
      emit_trace(event, event.target, entity(id));
      fire_block(event.target, id);
      break;
    }
    case BlockKind::Process: {
      // Service completion.
      if (!event.entity) throw KernelError(KernelError::Code::UnknownEntity, "departure event without entity");
      ResourceState& resource = resources_[block.resource];
      account_busy(resource);
      --resource.in_service;
      // FIFO: the longest waiting entity seizes before the departing one moves
      // on, so zero-time re-entry cannot overtake the queue.
      if (!resource.queue.empty()) {
        const Waiting next = resource.queue.front();
        resource.queue.pop_front();
        seize(resource, next.block, next.entity);
      }
      Entity& e = mutable_entity(*event.entity);
      const auto& p = std::get<ProcessParams>(block.spec->params);
      if (p.relabel) e.kind = *p.relabel;
      emit_trace(event, event.target, e);
      forward(event.target, e.id);
      break;
    }
    default:
      throw KernelError(KernelError::Code::InvalidModel,
                        fmt::format("block {} does not take calendar events", block.spec->id));
  }
}

void Kernel::fire_block(BlockIndex index, EntityId id) {
  BlockState& block = blocks_.at(index);
  Entity& e = mutable_entity(id);
  ++block.stats.entities_in;
  block.stats.units_in += e.units;

  switch (block.spec->kind()) {
    case BlockKind::Create:
    case BlockKind::CreatePort:
      forward(index, id);
      break;
    case BlockKind::Process: {
      ResourceState& resource = resources_[block.resource];
      if (resource.in_service < resource.capacity) {
        seize(resource, index, id);
      } else {
        resource.queue.push_back(Waiting{id, index});
      }
      break;
    }
    case BlockKind::Batch: {
      const auto& p = std::get<BatchParams>(block.spec->params);
      BatchAccumulator& acc = block.batch;
      if (acc.units == 0) acc.kind = e.kind;
      acc.units += e.units;
      entities_.erase(id);
      if (acc.units >= p.size) {
        const EntityId batch = create_entity(acc.kind, acc.units);
        acc = BatchAccumulator{};
        forward(index, batch);
      }
      break;
    }
    case BlockKind::Separate: {
      e.units += std::get<SeparateParams>(block.spec->params).added_units;
      forward(index, id);
      break;
    }
    case BlockKind::PortSend: {
      ++block.stats.entities_out;
      block.stats.units_out += e.units;
      if (port_sink_) {
        const auto& p = std::get<PortSendParams>(block.spec->params);
        port_sink_(PortSendRecord{clock_, sections_[block.section].lp_id, block.spec->id, p.destination, e});
      }
      entities_.erase(id);
      break;
    }
    case BlockKind::Dispose: {
      ++block.stats.entities_out;
      block.stats.units_out += e.units;
      Departure& d = sections_[block.section].departures[e.kind];
      ++d.entities;
      d.units += e.units;
      entities_.erase(id);
      break;
    }
  }
}

void Kernel::forward(BlockIndex from, EntityId id) {
  BlockState& block = blocks_[from];
  const Entity& e = entity(id);
  ++block.stats.entities_out;
  block.stats.units_out += e.units;
  fire_block(block.next, id);
}

void Kernel::seize(ResourceState& resource, BlockIndex index, EntityId id) {
  account_busy(resource);
  ++resource.in_service;
  ++resource.seizes;
  assert(resource.in_service <= resource.capacity);
  BlockState& block = blocks_[index];
  const auto& p = std::get<ProcessParams>(block.spec->params);
  const SimTime service{p.service.sample(block.rng)};
  schedule(Event{.time = clock_ + service, .priority = EventClass::Departure, .target = index, .entity = id});
}

void Kernel::account_busy(ResourceState& resource) {
  resource.busy_area += resource.in_service * (clock_ - resource.last_change).hours();
  resource.last_change = clock_;
}

EntityId Kernel::create_entity(std::string kind, std::uint64_t units) {
  if (units < 1) throw KernelError(KernelError::Code::InvalidModel, "entity must carry at least one unit");
  const EntityId id = next_entity_++;
  entities_.emplace(id, Entity{id, std::move(kind), units, clock_});
  return id;
}

const Entity& Kernel::entity(EntityId id) const {
  auto it = entities_.find(id);
  if (it == entities_.end()) throw KernelError(KernelError::Code::UnknownEntity, fmt::format("no entity {}", id));
  return it->second;
}

Entity& Kernel::mutable_entity(EntityId id) { return const_cast<Entity&>(std::as_const(*this).entity(id)); }

void Kernel::release_port_entity(BlockIndex port, SimTime release_time, std::uint64_t link_seq) {
  const BlockState& block = blocks_.at(port);
  if (block.spec->kind() != BlockKind::CreatePort) {
    throw KernelError(KernelError::Code::UnknownBlock, fmt::format("block {} is not a CreatePort", block.spec->id));
  }
  const std::uint64_t key = (static_cast<std::uint64_t>(block.local_index) << kLinkSeqBits) |
                            (link_seq & ((std::uint64_t{1} << kLinkSeqBits) - 1));
  schedule(Event{.time = release_time, .priority = EventClass::PortRelease, .order_key = key, .target = port});
}

BlockIndex Kernel::find_block(std::string_view lp_id, std::string_view block_id) const {
  for (const Section& s : sections_) {
    if (s.lp_id != lp_id) continue;
    auto it = s.block_by_id.find(std::string(block_id));
    if (it != s.block_by_id.end()) return it->second;
  }
  throw KernelError(KernelError::Code::UnknownBlock, fmt::format("unknown block {}/{}", lp_id, block_id));
}

std::optional<BlockIndex> Kernel::find_port(std::string_view lp_id, std::string_view source) const {
  for (const Section& s : sections_) {
    if (s.lp_id != lp_id) continue;
    auto it = s.port_by_source.find(std::string(source));
    if (it != s.port_by_source.end()) return it->second;
  }
  return std::nullopt;
}

const std::string& Kernel::block_lp(BlockIndex block) const { return sections_[blocks_.at(block).section].lp_id; }

std::vector<BlockIndex> Kernel::waiting_blocks() const {
  std::vector<BlockIndex> out;
  for (const ResourceState& r : resources_) {
    for (const Waiting& w : r.queue) out.push_back(w.block);
  }
  return out;
}

void Kernel::finish(SimTime end_time) {
  if (end_time < clock_) {
    throw KernelError(KernelError::Code::PastEvent,
                      fmt::format("finish at {} before clock {}", format_time(end_time), format_time(clock_)));
  }
  clock_ = end_time;
  for (ResourceState& r : resources_) account_busy(r);
}

LocalReport Kernel::report(std::string_view lp_id) const {
  for (const Section& s : sections_) {
    if (s.lp_id != lp_id) continue;
    LocalReport out;
    out.lp_id = s.lp_id;
    out.final_clock = clock_;
    out.events_executed = s.executed;
    const double elapsed = clock_.hours();
    for (std::size_t r : s.resources) {
      const ResourceState& state = resources_[r];
      ResourceStats stats;
      stats.id = state.id;
      stats.capacity = state.capacity;
      // Include service in progress up to the current clock.
      stats.busy_time = state.busy_area + state.in_service * (clock_ - state.last_change).hours();
      stats.utilization = elapsed > 0.0 ? stats.busy_time / (state.capacity * elapsed) : 0.0;
      stats.seizes = state.seizes;
      out.resources.push_back(std::move(stats));
    }
    for (BlockIndex b : s.blocks) out.blocks.push_back(blocks_[b].stats);
    for (const auto& [kind, d] : s.departures) out.departures.push_back(DepartureStats{kind, d.entities, d.units});
    return out;
  }
  throw KernelError(KernelError::Code::UnknownBlock, fmt::format("no LP section '{}'", lp_id));
}

void Kernel::emit_trace(const Event& event, BlockIndex block, const Entity& e) {
  if (!trace_sink_) return;
  const BlockState& state = blocks_[block];
  trace_sink_(TraceRecord{event.time, sections_[state.section].lp_id, state.spec->id, e.kind, e.units, event.seq});
}

}  // namespace dms
