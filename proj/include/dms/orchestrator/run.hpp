#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dms/kernel/kernel.hpp"
#include "dms/mq/tcp.hpp"
#include "dms/scenario/scenario.hpp"
#include "dms/sync/logical_process.hpp"

namespace dms::orchestrator {

enum class Mode { Sequential, DistributedLocal, DistributedRemote };

std::string_view to_string(Mode mode);
// "seq" | "local" | "remote"; throws std::invalid_argument.
Mode parse_mode(std::string_view text);

// LP id -> "host:port" of the workstation running it.
using HostMap = std::map<std::string, std::string>;

// `map <lp> -> host:port` lines, as written by the partitioner.
HostMap parse_host_map(std::string_view text);
HostMap load_host_map(const std::filesystem::path& path);
// Every LP on 127.0.0.1 with a currently free port.
HostMap loopback_host_map(const Scenario& scenario);

class RunError : public std::runtime_error {
 public:
  enum class Code { Validation, Causality, Deadlock, Transport };

  RunError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Exit status of the command-line tool for a failure of this kind.
int exit_code(RunError::Code code);

struct RunOptions {
  Mode mode = Mode::Sequential;
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
  std::chrono::milliseconds watchdog{30000};
  bool trace = false;
  std::uint64_t null_quantum = 100;
  HostMap hosts;  // DistributedRemote only; empty means loopback_host_map
  mq::RetryPolicy retry{};
};

struct LinkCount {
  std::string from;
  std::string to;
  std::uint64_t data_sent = 0;
  std::uint64_t data_received = 0;
  std::uint64_t units_sent = 0;
  friend bool operator==(const LinkCount&, const LinkCount&) = default;
};

enum class LpStatus { Finished, Stopped, Failed };
std::string_view to_string(LpStatus status);

// What one LP produced, in any mode.
struct LpOutcome {
  std::string lp_id;
  LpStatus status = LpStatus::Finished;
  std::string detail;  // failure message or watchdog snapshot
  LocalReport report;
  sync::LpCounters counters;
  std::map<std::string, std::uint64_t> received_from;  // DATA per input link
  std::vector<sync::DataRecord> sent;
  std::vector<TraceRecord> trace;
};

struct GlobalReport {
  std::string scenario;
  Mode mode = Mode::Sequential;
  std::uint64_t seed = 0;
  SimTime end_time{0.0};
  std::vector<LpOutcome> lps;  // scenario declaration order
  std::vector<LinkCount> links;
  double wall_seconds = 0.0;

  // DATA messages of every link, sorted.
  std::vector<sync::DataRecord> data() const;
  // Event trace of every LP merged by (time, lp, seq).
  std::vector<TraceRecord> trace() const;
  std::uint64_t events_executed() const;
  const LpOutcome* lp(std::string_view id) const;
};

// Validates, then runs one replication. Throws RunError; the watchdog
// message lists every LP's safe time, clock and next event.
GlobalReport run(const Scenario& scenario, const RunOptions& options);

// The sequential oracle: every LP in one kernel, each link replaced by an
// internal delay feeding the destination's CreatePort.
KernelModel flatten(const Scenario& scenario);

// Runs a single LP of a DistributedRemote deployment in this process: listens
// on its mapped port, connects to its peers, returns when Finished.
LpOutcome run_worker(const Scenario& scenario, std::string_view lp_id, const RunOptions& options);

// Builds link counts and ordering from per-LP outcomes (any mode).
GlobalReport assemble(const Scenario& scenario, Mode mode, std::uint64_t seed, std::vector<LpOutcome> outcomes,
                      double wall_seconds);

// Replications r = 0..n-1 use seed + r.
std::vector<GlobalReport> run_replications(const Scenario& scenario, const RunOptions& options);

// Shared between LP execution contexts of one run.
struct RunControl {
  std::atomic<bool> stop{false};
  std::atomic<std::int64_t> last_progress{0};  // steady_clock ticks
  void progress();
  std::chrono::steady_clock::duration idle() const;
};

}  // namespace dms::orchestrator
