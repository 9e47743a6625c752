#include "dms/sync/logical_process.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace dms::sync {

LpSpec make_lp_spec(const Scenario& scenario, std::string_view lp_id) {
  const LpDecl* decl = scenario.lp(lp_id);
  if (!decl) throw SyncError(SyncError::Code::InvalidSpec, fmt::format("scenario has no LP '{}'", lp_id));
  LpSpec spec;
  spec.id = decl->id();
  spec.model = decl->model;
  spec.lookahead = decl->lookahead;
  spec.end_time = scenario.end_time;
  for (const LinkSpec& l : scenario.in_links(lp_id)) spec.in_links.push_back({l.from, l.transfer});
  for (const LinkSpec& l : scenario.out_links(lp_id)) spec.out_links.push_back({l.to, l.transfer});
  return spec;
}

LogicalProcess::LogicalProcess(LpSpec spec, std::uint64_t master_seed, Outbox outbox)
    : spec_(std::move(spec)), kernel_(KernelModel{{spec_.model}}, master_seed), outbox_(std::move(outbox)) {
  if (!(spec_.lookahead.hours() > 0.0)) {
    throw SyncError(SyncError::Code::InvalidSpec, fmt::format("LP {}: lookahead must be positive", spec_.id));
  }
  if (spec_.null_quantum == 0) spec_.null_quantum = 1;
  for (const LinkEnd& in : spec_.in_links) {
    ChannelState c;
    c.source = in.lp;
    c.port = kernel_.find_port(spec_.id, in.lp);
    channels_.push_back(std::move(c));
  }
  for (const LinkEnd& out : spec_.out_links) {
    if (!out_.emplace(out.lp, OutLink{out, std::nullopt, 0}).second) {
      throw SyncError(SyncError::Code::InvalidSpec, fmt::format("LP {}: two links to {}", spec_.id, out.lp));
    }
  }
  reach_.resize(kernel_.block_count());
  for (BlockIndex b = 0; b < kernel_.block_count(); ++b) reach_[b] = reach_from(b);
  kernel_.set_port_sink([this](const PortSendRecord& r) { send_data(std::string(r.destination), r.time, r.entity.units); });
  kernel_.start();
}

std::optional<LogicalProcess::Reach> LogicalProcess::reach_from(BlockIndex block) const {
  auto bound = chain_bound(spec_.model, kernel_.block_spec(block).id);
  if (!bound) return std::nullopt;
  return Reach{bound->destination, bound->hours};
}

ChannelState& LogicalProcess::channel_of(const std::string& label) {
  for (ChannelState& c : channels_) {
    if (c.source == label) return c;
  }
  throw SyncError(SyncError::Code::UnknownLabel, fmt::format("LP {}: no input link from '{}'", spec_.id, label));
}

void LogicalProcess::on_receive(mq::TimestampedMessage msg) {
  ChannelState& c = channel_of(msg.label);
  const SimTime ts{msg.timestamp};
  if (c.clock.is_end()) {
    throw SyncError(SyncError::Code::CausalityViolation,
                    fmt::format("LP {}: {} message from {} after END", spec_.id, mq::to_string(msg.kind), c.source));
  }
  if (ts < c.clock.time()) {
    throw SyncError(SyncError::Code::CausalityViolation,
                    fmt::format("LP {}: {} from {} at t={} behind channel clock {}", spec_.id, mq::to_string(msg.kind),
                                c.source, format_time(ts), format_time(c.clock.time())));
  }
  c.clock = TimeBound(ts);
  switch (msg.kind) {
    case mq::MessageKind::Data:
      ++counters_.data_received;
      ++c.data_received;
      if (state_ != State::Running) {
        if (ts <= spec_.end_time) {
          throw SyncError(SyncError::Code::CausalityViolation,
                          fmt::format("LP {}: DATA from {} at t={} arrived after local termination", spec_.id,
                                      c.source, format_time(ts)));
        }
        ++counters_.late_messages;
        break;
      }
      c.pending.push_back(std::move(msg));
      break;
    case mq::MessageKind::Null:
      ++counters_.nulls_received;
      break;
    case mq::MessageKind::End:
      c.clock = TimeBound::end_of_time();
      break;
  }
}

TimeBound LogicalProcess::safe_time() const {
  TimeBound safe = TimeBound::end_of_time();
  for (const ChannelState& c : channels_) safe = std::min(safe, c.clock);
  return safe;
}

void LogicalProcess::deliver_ready(TimeBound safe) {
  for (ChannelState& c : channels_) {
    while (!c.pending.empty() && SimTime{c.pending.front().timestamp} <= safe) {
      mq::TimestampedMessage msg = std::move(c.pending.front());
      c.pending.pop_front();
      if (!c.port) {
        throw SyncError(SyncError::Code::UnknownLabel,
                        fmt::format("LP {}: no CreatePort for messages labelled '{}'", spec_.id, msg.label));
      }
      if (SimTime{msg.timestamp} > spec_.end_time) {
        ++counters_.late_messages;
        continue;
      }
      kernel_.release_port_entity(*c.port, SimTime{msg.timestamp}, msg.seq);
    }
  }
}

Progress LogicalProcess::step() {
  if (state_ == State::Finished) return Finished{};
  const TimeBound safe = safe_time();
  if (safe < last_safe_) {
    throw SyncError(SyncError::Code::CausalityViolation, fmt::format("LP {}: safe time decreased", spec_.id));
  }
  last_safe_ = safe;

  if (state_ == State::Draining) {
    if (safe.is_end()) {
      state_ = State::Finished;
      return Finished{};
    }
    ++counters_.blocked_steps;
    return Blocked{safe};
  }

  deliver_ready(safe);
  const Event* next = kernel_.peek();
  if (next && next->time <= spec_.end_time) {
    // A release at exactly the safe time could still be joined by another
    // message with the same timestamp and a smaller port/sequence key.
    const bool runnable = next->priority == EventClass::PortRelease ? next->time < safe : next->time <= safe;
    if (runnable) {
      if (last_executed_ && next->time < *last_executed_) {
        throw SyncError(SyncError::Code::CausalityViolation,
                        fmt::format("LP {}: event at t={} after t={}", spec_.id, format_time(next->time),
                                    format_time(*last_executed_)));
      }
      last_executed_ = next->time;
      if (next->priority == EventClass::PortRelease) ++counters_.data_released;
      kernel_.step();
      if (++since_null_ >= spec_.null_quantum) emit_nulls();
      return Advanced{};
    }
  } else if (spec_.end_time < safe) {
    terminate();
    return step();
  }
  emit_nulls();
  ++counters_.blocked_steps;
  return Blocked{safe};
}

Progress LogicalProcess::run_until_blocked() {
  while (true) {
    Progress p = step();
    if (!std::holds_alternative<Advanced>(p)) return p;
  }
}

void LogicalProcess::terminate() {
  kernel_.finish(spec_.end_time);
  for (ChannelState& c : channels_) {
    counters_.late_messages += c.pending.size();
    c.pending.clear();
  }
  for (auto& [dest, link] : out_) {
    const double ts = std::max(spec_.end_time.hours(), link.last_sent.value_or(0.0));
    outbox_(dest, mq::TimestampedMessage{mq::MessageKind::End, ts, spec_.id, "", 0});
    link.last_sent = ts;
  }
  state_ = State::Draining;
}

void LogicalProcess::send_data(const std::string& dest, SimTime send_clock, std::uint64_t units) {
  auto it = out_.find(dest);
  if (it == out_.end()) {
    throw SyncError(SyncError::Code::UnknownLink, fmt::format("LP {}: no output link to '{}'", spec_.id, dest));
  }
  OutLink& link = it->second;
  const double ts = (send_clock + link.end.transfer).hours();
  if (link.last_sent && ts < *link.last_sent) {
    throw SyncError(SyncError::Code::CausalityViolation,
                    fmt::format("LP {}: DATA to {} at t={} below the promised t={}", spec_.id, dest,
                                format_double(ts), format_double(*link.last_sent)));
  }
  std::string body = std::to_string(units);
  data_log_.push_back(DataRecord{ts, spec_.id, dest, body});
  outbox_(dest, mq::TimestampedMessage{mq::MessageKind::Data, ts, spec_.id, std::move(body), 0});
  link.last_sent = ts;
  ++link.data_sent;
  ++counters_.data_sent;
}

std::optional<SimTime> LogicalProcess::output_bound(std::string_view dest) const {
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::optional<Reach>& r, double from) {
    if (r && r->dest == dest) best = std::min(best, from + r->hours);
  };
  for (const Event& e : kernel_.pending()) {
    // Departures have finished their service; what follows starts at the successor.
    const BlockIndex b = kernel_.block_spec(e.target).kind() == BlockKind::Process ? kernel_.successor(e.target) : e.target;
    if (b != Kernel::npos) consider(reach_[b], e.time.hours());
  }
  // Queued entities cannot start service before the next event frees a unit.
  const double next = kernel_.peek() ? kernel_.peek()->time.hours() : kernel_.clock().hours();
  for (BlockIndex b : kernel_.waiting_blocks()) consider(reach_[b], next);
  for (const ChannelState& c : channels_) {
    if (!c.port) continue;
    const auto& r = reach_[*c.port];
    if (!c.pending.empty()) consider(r, c.pending.front().timestamp);
    if (!c.clock.is_end() && r && r->dest == dest) {
      // Future input: the declared lookahead is the LP's promised minimum
      // processing time; the static chain bound may be tighter.
      best = std::min(best, c.clock.time().hours() + std::max(spec_.lookahead.hours(), r->hours));
    }
  }
  if (best == std::numeric_limits<double>::infinity()) return std::nullopt;
  return SimTime{best};
}

void LogicalProcess::emit_nulls() {
  since_null_ = 0;
  if (state_ != State::Running) return;
  for (auto& [dest, link] : out_) {
    const auto bound = output_bound(dest);
    const double ts = bound ? (*bound + link.end.transfer).hours()
                            : (spec_.end_time + spec_.lookahead + link.end.transfer).hours();
    if (link.last_sent && ts <= *link.last_sent) {
      ++counters_.nulls_suppressed;
      continue;
    }
    outbox_(dest, mq::TimestampedMessage{mq::MessageKind::Null, ts, spec_.id, "", 0});
    link.last_sent = ts;
    ++counters_.nulls_sent;
  }
}

}  // namespace dms::sync
