#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dms/kernel/kernel.hpp"
#include "dms/mq/message.hpp"
#include "dms/scenario/scenario.hpp"

namespace dms::sync {

class SyncError : public std::runtime_error {
 public:
  enum class Code { CausalityViolation, UnknownLabel, UnknownLink, InvalidSpec };

  SyncError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct LinkEnd {
  std::string lp;  // the LP at the other end
  SimTime transfer{0.0};
};

struct LpSpec {
  std::string id;
  LpModel model;
  std::vector<LinkEnd> in_links;
  std::vector<LinkEnd> out_links;
  SimTime lookahead{1.0};
  SimTime end_time{5000.0};
  // Events executed between null emissions while running.
  std::uint64_t null_quantum = 100;
};

// Throws SyncError(InvalidSpec) for an unknown LP.
LpSpec make_lp_spec(const Scenario& scenario, std::string_view lp_id);

struct ChannelState {
  std::string source;
  TimeBound clock{SimTime{0.0}};  // end_of_time once END arrived
  std::deque<mq::TimestampedMessage> pending;  // DATA not yet handed to the kernel
  std::optional<std::size_t> port;             // CreatePort fed by this channel
  std::uint64_t data_received = 0;
};

struct Advanced {};
struct Blocked {
  TimeBound until;
};
struct Finished {};
using Progress = std::variant<Advanced, Blocked, Finished>;

// One DATA message as sent: the unit of the oracle comparison.
struct DataRecord {
  double timestamp = 0.0;
  std::string source;
  std::string dest;
  std::string body;
  friend auto operator<=>(const DataRecord&, const DataRecord&) = default;
};

struct LpCounters {
  std::uint64_t data_sent = 0;
  std::uint64_t data_received = 0;
  std::uint64_t data_released = 0;  // port releases executed
  std::uint64_t nulls_sent = 0;
  std::uint64_t nulls_suppressed = 0;
  std::uint64_t nulls_received = 0;
  std::uint64_t blocked_steps = 0;
  std::uint64_t late_messages = 0;  // DATA past end_time, never released
};

// Conservative (null-message) synchronization around one LP's kernel.
//
// Driving loop: feed every incoming message to on_receive(), call step()
// until it returns Blocked (then wait for input) or Finished.
class LogicalProcess {
 public:
  using Outbox = std::function<void(const std::string& dest, mq::TimestampedMessage msg)>;

  LogicalProcess(LpSpec spec, std::uint64_t master_seed, Outbox outbox);
  LogicalProcess(const LogicalProcess&) = delete;
  LogicalProcess& operator=(const LogicalProcess&) = delete;

  const LpSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }
  Kernel& kernel() { return kernel_; }
  const Kernel& kernel() const { return kernel_; }

  // Throws CausalityViolation on a timestamp below the channel clock or any
  // message after END, UnknownLabel for an unknown sender.
  void on_receive(mq::TimestampedMessage msg);

  TimeBound safe_time() const;
  Progress step();
  // Steps until Blocked or Finished.
  Progress run_until_blocked();

  // Called for each PortSend firing. Throws UnknownLink.
  void send_data(const std::string& dest, SimTime send_clock, std::uint64_t units);
  void emit_nulls();

  // Lower bound on the send clock of any future DATA towards `dest`;
  // nullopt when nothing can reach it any more.
  std::optional<SimTime> output_bound(std::string_view dest) const;

  const std::vector<ChannelState>& channels() const { return channels_; }
  const std::vector<DataRecord>& data_log() const { return data_log_; }
  const LpCounters& counters() const { return counters_; }
  bool finished() const { return state_ == State::Finished; }
  // True once the LP passed end_time and sent END downstream.
  bool locally_done() const { return state_ != State::Running; }
  LocalReport report() const { return kernel_.report(spec_.id); }

 private:
  enum class State { Running, Draining, Finished };

  struct OutLink {
    LinkEnd end;
    std::optional<double> last_sent;
    std::uint64_t data_sent = 0;
  };

  // Where the chain starting at a block ends, and its summed service lower bound.
  struct Reach {
    std::string dest;
    double hours = 0.0;
  };

  ChannelState& channel_of(const std::string& label);
  void deliver_ready(TimeBound safe);
  void terminate();
  std::optional<Reach> reach_from(BlockIndex block) const;

  LpSpec spec_;
  Kernel kernel_;
  Outbox outbox_;
  std::vector<ChannelState> channels_;
  std::map<std::string, OutLink, std::less<>> out_;
  std::vector<std::optional<Reach>> reach_;  // per kernel block, inclusive of its own service
  State state_ = State::Running;
  std::uint64_t since_null_ = 0;
  TimeBound last_safe_{SimTime{0.0}};
  std::optional<SimTime> last_executed_;
  std::vector<DataRecord> data_log_;
  LpCounters counters_;
};

}  // namespace dms::sync
