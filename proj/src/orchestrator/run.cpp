#include "dms/orchestrator/run.hpp"

#include <sys/socket.h>
#include <netinet/in.h>
#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "dms/activity/partition.hpp"
#include "dms/mq/transport.hpp"

namespace dms::orchestrator {
namespace {

using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

// One LP's result plus the error that ended it, if any.
struct Execution {
  LpOutcome outcome;
  std::optional<RunError> error;
};

// How an LP reaches the queues of the others.
struct Wiring {
  std::shared_ptr<mq::QueueManager> manager;  // this LP's own pq/sq live here
  std::unique_ptr<mq::Transport> transport;
  std::function<mq::QueueAddress(const std::string& lp, const std::string& queue)> address;
};

std::string snapshot(const sync::LogicalProcess& lp) {
  auto bound = [](const TimeBound& t) { return t.is_end() ? std::string("end") : format_double(t.time().hours()); };
  std::string channels;
  for (const sync::ChannelState& c : lp.channels()) {
    channels += fmt::format(" {}={}", c.source, bound(c.clock));
  }
  const Event* next = lp.kernel().peek();
  return fmt::format("LP {}: safe_time={} clock={} next_event={} channels:{}", lp.id(), bound(lp.safe_time()),
                     format_double(lp.kernel().clock().hours()), next ? format_double(next->time.hours()) : "none",
                     channels.empty() ? " none" : channels);
}

Execution execute_lp(const Scenario& scenario, const std::string& id, std::uint64_t seed, const RunOptions& options,
                     RunControl& control, Wiring& wiring) {
  Execution ex;
  ex.outcome.lp_id = id;
  std::optional<sync::LogicalProcess> lp;
  std::map<std::string, std::unique_ptr<mq::SendHandle>> data_out, sync_out;
  auto collect = [&] {
    if (!lp) return;
    ex.outcome.report = lp->report();
    ex.outcome.counters = lp->counters();
    ex.outcome.sent = lp->data_log();
    for (const sync::ChannelState& c : lp->channels()) ex.outcome.received_from[c.source] = c.data_received;
  };
  try {
    mq::Consumer consumer(wiring.manager);
    auto pq = wiring.transport->open_receive(mq::QueueAddress::local(mq::data_queue_name(id)), consumer);
    auto sq = wiring.transport->open_receive(mq::QueueAddress::local(mq::sync_queue_name(id)), consumer);
    std::deque<mq::TimestampedMessage> inbox;
    mq::Notification on_pq, on_sq;
    on_pq = [&](mq::TimestampedMessage m) {
      inbox.push_back(std::move(m));
      pq->notify(on_pq);
    };
    on_sq = [&](mq::TimestampedMessage m) {
      inbox.push_back(std::move(m));
      sq->notify(on_sq);
    };
    pq->notify(on_pq);
    sq->notify(on_sq);

    sync::LpSpec spec = sync::make_lp_spec(scenario, id);
    spec.null_quantum = options.null_quantum;
    for (const sync::LinkEnd& out : spec.out_links) {
      data_out[out.lp] = wiring.transport->open_send(wiring.address(out.lp, mq::data_queue_name(out.lp)));
      sync_out[out.lp] = wiring.transport->open_send(wiring.address(out.lp, mq::sync_queue_name(out.lp)));
    }
    lp.emplace(std::move(spec), seed, [&](const std::string& dest, mq::TimestampedMessage msg) {
      (msg.kind == mq::MessageKind::Data ? data_out : sync_out).at(dest)->send(std::move(msg));
    });
    if (options.trace) {
      lp->kernel().set_trace_sink([&](const TraceRecord& r) { ex.outcome.trace.push_back(r); });
    }

    auto drain_inbox = [&] {
      if (inbox.empty()) return;
      control.progress();
      while (!inbox.empty()) {
        lp->on_receive(std::move(inbox.front()));
        inbox.pop_front();
      }
    };
    while (!control.stop) {
      consumer.pump(0ms);
      drain_inbox();
      sync::Progress p;
      int advanced = 0;
      // Batches of steps between polls keep queue locking off the hot path.
      do {
        p = lp->step();
      } while (std::holds_alternative<sync::Advanced>(p) && ++advanced < 256);
      if (advanced > 0) control.progress();
      if (std::holds_alternative<sync::Finished>(p)) {
        control.progress();
        break;
      }
      if (std::holds_alternative<sync::Blocked>(p)) {
        consumer.pump(20ms);
        drain_inbox();
      }
    }
    ex.outcome.status = lp->finished() ? LpStatus::Finished : LpStatus::Stopped;
    if (!lp->finished()) ex.outcome.detail = snapshot(*lp);
    pq->close();
    sq->close();
  } catch (const sync::SyncError& e) {
    ex.error = RunError(RunError::Code::Causality, e.what());
  } catch (const KernelError& e) {
    ex.error = RunError(RunError::Code::Causality, fmt::format("LP {}: {}", id, e.what()));
  } catch (const mq::TransportError& e) {
    ex.error = RunError(RunError::Code::Transport, fmt::format("LP {}: {}", id, e.what()));
  }
  if (ex.error) {
    ex.outcome.status = LpStatus::Failed;
    ex.outcome.detail = ex.error->what();
  }
  for (auto& [dest, h] : data_out) h->close();
  for (auto& [dest, h] : sync_out) h->close();
  collect();
  return ex;
}

// Runs one execution context per task, watching for global stalls. The first
// failure (or the watchdog) stops everyone; `abort` wakes blocked contexts.
std::vector<Execution> run_contexts(std::vector<std::function<Execution(RunControl&)>> tasks,
                                    std::chrono::milliseconds watchdog, const std::function<void(const std::string&)>& abort) {
  RunControl control;
  control.progress();
  std::vector<Execution> results(tasks.size());
  std::mutex mu;
  std::condition_variable cv;
  std::size_t done = 0;
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    threads.emplace_back([&, i] {
      Execution ex = tasks[i](control);
      const bool failed = ex.error.has_value();
      std::lock_guard lock(mu);
      results[i] = std::move(ex);
      ++done;
      if (failed && !control.stop.exchange(true)) abort(results[i].error->what());
      cv.notify_all();
    });
  }
  bool stalled = false;
  {
    std::unique_lock lock(mu);
    while (done < tasks.size()) {
      cv.wait_for(lock, 50ms);
      if (!control.stop && control.idle() > watchdog) {
        stalled = true;
        control.stop = true;
      }
    }
  }
  for (std::thread& t : threads) t.join();
  if (stalled) {
    std::string what = fmt::format("deadlock: no LP advanced for {} ms", watchdog.count());
    for (const Execution& ex : results) what += "\n  " + ex.outcome.detail;
    throw RunError(RunError::Code::Deadlock, what);
  }
  // Lost peers are usually the echo of another LP failing, so prefer any other cause.
  const Execution* first = nullptr;
  for (const Execution& ex : results) {
    if (!ex.error) continue;
    if (!first || (first->error->code() == RunError::Code::Transport && ex.error->code() != RunError::Code::Transport)) {
      first = &ex;
    }
  }
  if (first) throw *first->error;
  return results;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw std::invalid_argument("expected host:port, got '" + text + "'");
  unsigned port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port == 0 || port > 65535) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in '" + text + "'");
  }
  return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

std::uint64_t effective_seed(const Scenario& s, const RunOptions& o) { return o.seed.value_or(s.seed); }

GlobalReport run_sequential(const Scenario& s, const RunOptions& o) {
  const auto start = Clock::now();
  const std::uint64_t seed = effective_seed(s, o);
  Kernel kernel(flatten(s), seed);
  std::vector<LpOutcome> outcomes;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const LpDecl& d : s.lps) {
    index.emplace(d.id(), outcomes.size());
    outcomes.emplace_back().lp_id = d.id();
  }
  std::map<std::pair<std::string, std::string>, std::uint64_t> link_seq;
  kernel.set_port_sink([&](const PortSendRecord& r) {
    const LinkSpec* link = s.link(r.lp_id, r.destination);
    if (!link) throw RunError(RunError::Code::Validation, fmt::format("no link {} -> {}", r.lp_id, r.destination));
    const SimTime ts = r.time + link->transfer;
    const std::uint64_t seq = ++link_seq[{link->from, link->to}];
    LpOutcome& from = outcomes[index.find(r.lp_id)->second];
    LpOutcome& to = outcomes[index.find(r.destination)->second];
    from.sent.push_back(sync::DataRecord{ts.hours(), link->from, link->to, std::to_string(r.entity.units)});
    ++from.counters.data_sent;
    ++to.counters.data_received;
    ++to.received_from[link->from];
    if (ts > s.end_time) {
      ++to.counters.late_messages;
      return;
    }
    kernel.release_port_entity(*kernel.find_port(link->to, link->from), ts, seq);
  });
  if (o.trace) {
    kernel.set_trace_sink([&](const TraceRecord& r) { outcomes[index.at(r.lp_id)].trace.push_back(r); });
  }
  kernel.start();
  while (const Event* next = kernel.peek()) {
    if (next->time > s.end_time) break;
    if (next->priority == EventClass::PortRelease) ++outcomes[index.at(kernel.block_lp(next->target))].counters.data_released;
    kernel.step();
  }
  kernel.finish(s.end_time);
  for (LpOutcome& out : outcomes) {
    out.report = kernel.report(out.lp_id);
    for (const LinkSpec& l : s.in_links(out.lp_id)) out.received_from.try_emplace(l.from, 0);
  }
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  return assemble(s, Mode::Sequential, seed, std::move(outcomes), wall);
}

GlobalReport run_local(const Scenario& s, const RunOptions& o) {
  const auto start = Clock::now();
  const std::uint64_t seed = effective_seed(s, o);
  auto manager = mq::QueueManager::create();
  std::vector<std::function<Execution(RunControl&)>> tasks;
  for (const LpDecl& d : s.lps) {
    tasks.push_back([&, id = d.id()](RunControl& control) {
      Wiring w{manager, std::make_unique<mq::Transport>(manager, o.retry),
               [](const std::string&, const std::string& q) { return mq::QueueAddress::local(q); }};
      return execute_lp(s, id, seed, o, control, w);
    });
  }
  auto results = run_contexts(std::move(tasks), o.watchdog, [&](const std::string& why) { manager->fail(why); });
  std::vector<LpOutcome> outcomes;
  for (Execution& ex : results) outcomes.push_back(std::move(ex.outcome));
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  return assemble(s, Mode::DistributedLocal, seed, std::move(outcomes), wall);
}

mq::QueueAddress remote_address(const HostMap& hosts, const std::string& lp, const std::string& queue) {
  auto it = hosts.find(lp);
  if (it == hosts.end()) {
    throw mq::TransportError(mq::TransportError::Code::Unreachable, fmt::format("no workstation mapped for LP {}", lp));
  }
  const auto [host, port] = split_host_port(it->second);
  return mq::QueueAddress{host, port, queue};
}

void check_host_map(const Scenario& s, const HostMap& hosts) {
  std::vector<std::string> problems;
  std::set<std::string> used;
  for (const LpDecl& d : s.lps) {
    auto it = hosts.find(d.id());
    if (it == hosts.end()) {
      problems.push_back(fmt::format("LP {} has no workstation", d.id()));
      continue;
    }
    try {
      split_host_port(it->second);
    } catch (const std::invalid_argument& e) {
      problems.push_back(fmt::format("LP {}: {}", d.id(), e.what()));
    }
    if (!used.insert(it->second).second) problems.push_back(fmt::format("workstation {} hosts two LPs", it->second));
  }
  if (!problems.empty()) {
    std::string what = "invalid host map:";
    for (const auto& p : problems) what += "\n  " + p;
    throw RunError(RunError::Code::Validation, what);
  }
}

GlobalReport run_remote(const Scenario& s, const RunOptions& o) {
  const auto start = Clock::now();
  const std::uint64_t seed = effective_seed(s, o);
  // Listeners first, so every port is known (and bound) before anyone connects.
  std::vector<std::shared_ptr<mq::QueueManager>> managers;
  std::vector<std::unique_ptr<mq::TcpListener>> listeners;
  HostMap hosts = o.hosts;
  if (!hosts.empty()) check_host_map(s, hosts);
  try {
    for (const LpDecl& d : s.lps) {
      managers.push_back(mq::QueueManager::create());
      const std::uint16_t port = hosts.empty() ? 0 : split_host_port(hosts.at(d.id())).second;
      listeners.push_back(std::make_unique<mq::TcpListener>(
          managers.back(), port,
          mq::TcpListener::Routing{mq::data_queue_name(d.id()), mq::sync_queue_name(d.id())}));
    }
  } catch (const mq::TransportError& e) {
    throw RunError(RunError::Code::Transport, e.what());
  }
  if (hosts.empty()) {
    for (std::size_t i = 0; i < s.lps.size(); ++i) {
      hosts[s.lps[i].id()] = fmt::format("127.0.0.1:{}", listeners[i]->port());
    }
  }
  std::vector<std::function<Execution(RunControl&)>> tasks;
  for (std::size_t i = 0; i < s.lps.size(); ++i) {
    tasks.push_back([&, i](RunControl& control) {
      Wiring w{managers[i], std::make_unique<mq::Transport>(managers[i], o.retry),
               [&](const std::string& lp, const std::string& q) { return remote_address(hosts, lp, q); }};
      Execution ex = execute_lp(s, s.lps[i].id(), seed, o, control, w);
      w.transport->close();
      return ex;
    });
  }
  auto fail_all = [&](const std::string& why) {
    for (auto& m : managers) m->fail(why);
  };
  std::vector<Execution> results;
  try {
    results = run_contexts(std::move(tasks), o.watchdog, fail_all);
  } catch (...) {
    for (auto& l : listeners) l->stop();
    throw;
  }
  for (auto& l : listeners) l->stop();
  std::vector<LpOutcome> outcomes;
  for (Execution& ex : results) outcomes.push_back(std::move(ex.outcome));
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  return assemble(s, Mode::DistributedRemote, seed, std::move(outcomes), wall);
}

}  // namespace

void RunControl::progress() { last_progress = Clock::now().time_since_epoch().count(); }

Clock::duration RunControl::idle() const {
  return Clock::now().time_since_epoch() - Clock::duration(last_progress.load());
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Sequential:
      return "seq";
    case Mode::DistributedLocal:
      return "local";
    case Mode::DistributedRemote:
      return "remote";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : {Mode::Sequential, Mode::DistributedLocal, Mode::DistributedRemote}) {
    if (to_string(m) == text) return m;
  }
  throw std::invalid_argument(fmt::format("unknown mode '{}' (seq, local or remote)", text));
}

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Finished:
      return "finished";
    case LpStatus::Stopped:
      return "stopped";
    case LpStatus::Failed:
      return "failed";
  }
  return "?";
}

int exit_code(RunError::Code code) {
  switch (code) {
    case RunError::Code::Validation:
      return 2;
    case RunError::Code::Causality:
    case RunError::Code::Deadlock:
      return 3;
    case RunError::Code::Transport:
      return 4;
  }
  return 1;
}

HostMap parse_host_map(std::string_view text) {
  HostMap hosts;
  try {
    for (auto& [lp, host] : activity::parse_mapping(text).assignment) hosts.emplace(lp, host);
  } catch (const activity::ActivityError& e) {
    throw RunError(RunError::Code::Validation, fmt::format("host map: {}", e.what()));
  }
  return hosts;
}

HostMap load_host_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError(RunError::Code::Validation, fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_host_map(buf.str());
}

HostMap loopback_host_map(const Scenario& scenario) {
  HostMap hosts;
  std::vector<mq::Socket> held;  // keep ports distinct while choosing
  for (const LpDecl& d : scenario.lps) {
    mq::Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    socklen_t len = sizeof(addr);
    if (!s.valid() || ::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
      throw RunError(RunError::Code::Transport, "cannot reserve a loopback port");
    }
    hosts[d.id()] = fmt::format("127.0.0.1:{}", ntohs(addr.sin_port));
    held.push_back(std::move(s));
  }
  return hosts;
}

KernelModel flatten(const Scenario& scenario) {
  KernelModel model;
  for (const LpDecl& d : scenario.lps) model.sections.push_back(d.model);
  return model;
}

GlobalReport assemble(const Scenario& s, Mode mode, std::uint64_t seed, std::vector<LpOutcome> outcomes,
                      double wall_seconds) {
  GlobalReport g;
  g.scenario = s.name;
  g.mode = mode;
  g.seed = seed;
  g.end_time = s.end_time;
  g.wall_seconds = wall_seconds;
  for (const LpDecl& d : s.lps) {
    auto it = std::find_if(outcomes.begin(), outcomes.end(), [&](const LpOutcome& o) { return o.lp_id == d.id(); });
    if (it != outcomes.end()) g.lps.push_back(std::move(*it));
  }
  for (const LinkSpec& l : s.links) {
    LinkCount c{l.from, l.to};
    if (const LpOutcome* from = g.lp(l.from)) {
      for (const sync::DataRecord& d : from->sent) {
        if (d.dest != l.to) continue;
        ++c.data_sent;
        c.units_sent += std::stoull(d.body);
      }
    }
    if (const LpOutcome* to = g.lp(l.to)) {
      auto it = to->received_from.find(l.from);
      if (it != to->received_from.end()) c.data_received = it->second;
    }
    g.links.push_back(c);
  }
  return g;
}

std::vector<sync::DataRecord> GlobalReport::data() const {
  std::vector<sync::DataRecord> all;
  for (const LpOutcome& o : lps) all.insert(all.end(), o.sent.begin(), o.sent.end());
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<TraceRecord> GlobalReport::trace() const {
  std::vector<TraceRecord> all;
  for (const LpOutcome& o : lps) all.insert(all.end(), o.trace.begin(), o.trace.end());
  std::stable_sort(all.begin(), all.end(), [](const TraceRecord& a, const TraceRecord& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.lp_id != b.lp_id) return a.lp_id < b.lp_id;
    return a.seq < b.seq;
  });
  return all;
}

std::uint64_t GlobalReport::events_executed() const {
  std::uint64_t n = 0;
  for (const LpOutcome& o : lps) n += o.report.events_executed;
  return n;
}

const LpOutcome* GlobalReport::lp(std::string_view id) const {
  auto it = std::find_if(lps.begin(), lps.end(), [&](const LpOutcome& o) { return o.lp_id == id; });
  return it == lps.end() ? nullptr : &*it;
}

GlobalReport run(const Scenario& scenario, const RunOptions& options) {
  if (auto problems = validation_problems(scenario); !problems.empty()) {
    std::string what = "invalid scenario:";
    for (const auto& p : problems) what += "\n  " + p;
    throw RunError(RunError::Code::Validation, what);
  }
  switch (options.mode) {
    case Mode::Sequential:
      return run_sequential(scenario, options);
    case Mode::DistributedLocal:
      return run_local(scenario, options);
    case Mode::DistributedRemote:
      return run_remote(scenario, options);
  }
  throw std::logic_error("unknown mode");
}

std::vector<GlobalReport> run_replications(const Scenario& scenario, const RunOptions& options) {
  std::vector<GlobalReport> out;
  const std::uint64_t base = effective_seed(scenario, options);
  for (std::uint32_t r = 0; r < scenario.replications; ++r) {
    RunOptions o = options;
    o.seed = base + r;
    out.push_back(run(scenario, o));
  }
  return out;
}

LpOutcome run_worker(const Scenario& scenario, std::string_view lp_id, const RunOptions& options) {
  if (auto problems = validation_problems(scenario); !problems.empty()) {
    throw RunError(RunError::Code::Validation, "invalid scenario: " + problems.front());
  }
  if (!scenario.lp(lp_id)) throw RunError(RunError::Code::Validation, fmt::format("scenario has no LP '{}'", lp_id));
  check_host_map(scenario, options.hosts);
  const std::string id(lp_id);
  auto manager = mq::QueueManager::create();
  std::unique_ptr<mq::TcpListener> listener;
  try {
    listener = std::make_unique<mq::TcpListener>(
        manager, split_host_port(options.hosts.at(id)).second,
        mq::TcpListener::Routing{mq::data_queue_name(id), mq::sync_queue_name(id)});
  } catch (const mq::TransportError& e) {
    throw RunError(RunError::Code::Transport, e.what());
  }
  std::vector<std::function<Execution(RunControl&)>> tasks;
  tasks.push_back([&](RunControl& control) {
    Wiring w{manager, std::make_unique<mq::Transport>(manager, options.retry),
             [&](const std::string& lp, const std::string& q) { return remote_address(options.hosts, lp, q); }};
    Execution ex = execute_lp(scenario, id, effective_seed(scenario, options), options, control, w);
    w.transport->close();
    return ex;
  });
  std::vector<Execution> results;
  try {
    results = run_contexts(std::move(tasks), options.watchdog, [&](const std::string& why) { manager->fail(why); });
  } catch (...) {
    listener->stop();
    throw;
  }
  listener->stop();
  return std::move(results.front().outcome);
}

}  // namespace dms::orchestrator
