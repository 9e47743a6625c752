// dms-sim: run, validate, partition and compare distributed manufacturing
// simulations.

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "dms/activity/partition.hpp"
#include "dms/orchestrator/report_io.hpp"
#include "dms/orchestrator/run.hpp"

extern char** environ;

namespace fs = std::filesystem;
using namespace dms;
using namespace dms::orchestrator;

namespace {

constexpr int kValidationExit = 2;

// Thrown for unreadable inputs and bad flag values; exits like a validation failure.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw UsageError(fmt::format("cannot write {}", path.string()));
}

Scenario read_scenario(const fs::path& path) {
  try {
    return load_scenario_text(read_file(path));
  } catch (const ParseError& e) {
    throw UsageError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ValidationError& e) {
    std::string what = fmt::format("{}: invalid scenario", path.string());
    for (const auto& p : e.problems()) what += "\n  " + p;
    throw UsageError(what);
  }
}

// `<stem>.r<N><ext>` when a run has several replications.
fs::path replication_path(const fs::path& path, std::size_t r, std::size_t count) {
  if (count <= 1) return path;
  fs::path out = path;
  out.replace_filename(fmt::format("{}.r{}{}", path.stem().string(), r, path.extension().string()));
  return out;
}

std::string render_report(const GlobalReport& report, const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".json") return to_json(report) + "\n";
  if (ext == ".csv") return to_csv(report);
  return to_text(report);
}

bool is_loopback(const std::string& host_port) {
  const std::string host = host_port.substr(0, host_port.rfind(':'));
  return host == "localhost" || host.rfind("127.", 0) == 0;
}

struct RunArgs {
  fs::path scenario;
  std::string mode = "seq";
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> trace;
  std::optional<fs::path> report;
  std::optional<fs::path> hosts;
  double watchdog_seconds = 30.0;
  std::uint64_t null_quantum = 100;
};

RunOptions run_options(const RunArgs& a) {
  RunOptions o;
  try {
    o.mode = parse_mode(a.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  o.seed = a.seed;
  o.trace = a.trace.has_value();
  o.watchdog = std::chrono::milliseconds(static_cast<std::int64_t>(a.watchdog_seconds * 1000));
  o.null_quantum = a.null_quantum;
  if (a.hosts) o.hosts = load_host_map(*a.hosts);
  return o;
}

// Remote mode from the command line: one worker process per LP mapped to this
// machine. LPs mapped elsewhere have to be started there by hand.
GlobalReport run_remote_processes(const RunArgs& args, const Scenario& s, RunOptions o, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  if (o.hosts.empty()) o.hosts = loopback_host_map(s);
  const fs::path dir = fs::temp_directory_path() / fmt::format("dms-sim-{}-{}", ::getpid(), seed);
  fs::create_directories(dir);
  std::string map_text;
  for (const auto& [lp, host] : o.hosts) map_text += fmt::format("map {} -> {}\n", lp, host);
  write_file(dir / "hosts.map", map_text);

  const std::string self = fs::read_symlink("/proc/self/exe").string();
  std::map<pid_t, std::string> children;
  for (const LpDecl& d : s.lps) {
    const std::string& host = o.hosts.at(d.id());
    std::vector<std::string> argv{self,           "worker",
                                  args.scenario.string(), "--lp",
                                  d.id(),         "--hosts",
                                  (dir / "hosts.map").string(), "--seed",
                                  std::to_string(seed), "--out",
                                  (dir / (d.id() + ".json")).string(), "--watchdog",
                                  fmt::format("{}", args.watchdog_seconds), "--null-quantum",
                                  std::to_string(o.null_quantum)};
    if (o.trace) argv.push_back("--trace-events");
    if (!is_loopback(host)) {
      std::cerr << fmt::format("LP {} is mapped to {}; start it there with:\n  dms-sim {}\n", d.id(), host,
                               fmt::join(argv.begin() + 1, argv.end(), " "));
      continue;
    }
    std::vector<char*> cargv;
    for (std::string& a : argv) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    pid_t pid = 0;
    if (::posix_spawn(&pid, self.c_str(), nullptr, nullptr, cargv.data(), environ) != 0) {
      for (const auto& [p, lp] : children) ::kill(p, SIGTERM);
      throw RunError(RunError::Code::Transport, fmt::format("cannot start worker for LP {}", d.id()));
    }
    children.emplace(pid, d.id());
  }

  // The first failing worker decides the exit status; the rest are stopped.
  std::optional<RunError> failure;
  while (!children.empty()) {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid < 0) break;
    auto it = children.find(pid);
    if (it == children.end()) continue;
    const std::string lp = it->second;
    children.erase(it);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    if (code == 0 || failure) continue;
    const RunError::Code kind = code == kValidationExit ? RunError::Code::Validation
                                : code == 3             ? RunError::Code::Causality
                                                        : RunError::Code::Transport;
    failure = RunError(kind, fmt::format("worker for LP {} exited with status {}", lp, code));
    for (const auto& [p, other] : children) ::kill(p, SIGTERM);
  }
  if (failure) {
    fs::remove_all(dir);
    throw *failure;
  }

  std::vector<LpOutcome> outcomes;
  for (const LpDecl& d : s.lps) {
    const fs::path out = dir / (d.id() + ".json");
    if (fs::exists(out)) outcomes.push_back(outcome_from_json(read_file(out)));
  }
  fs::remove_all(dir);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return assemble(s, Mode::DistributedRemote, seed, std::move(outcomes), wall);
}

int cmd_run(const RunArgs& args) {
  const Scenario s = read_scenario(args.scenario);
  const RunOptions base = run_options(args);
  const std::uint64_t first_seed = base.seed.value_or(s.seed);
  for (std::uint32_t r = 0; r < s.replications; ++r) {
    RunOptions o = base;
    o.seed = first_seed + r;
    const GlobalReport report =
        o.mode == Mode::DistributedRemote ? run_remote_processes(args, s, o, *o.seed) : run(s, o);
    if (args.report) {
      write_file(replication_path(*args.report, r, s.replications), render_report(report, *args.report));
    } else {
      std::cout << to_text(report);
    }
    if (args.trace) write_file(replication_path(*args.trace, r, s.replications), write_trace(trace_file(report)));
    std::cerr << fmt::format("{} {} seed {}: {} events, {:.3f} s\n", s.name, to_string(report.mode), report.seed,
                             report.events_executed(), report.wall_seconds);
  }
  return 0;
}

struct WorkerArgs {
  fs::path scenario;
  std::string lp;
  fs::path hosts;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  double watchdog_seconds = 30.0;
  std::uint64_t null_quantum = 100;
  bool trace = false;
};

int cmd_worker(const WorkerArgs& args) {
  const Scenario s = read_scenario(args.scenario);
  RunOptions o;
  o.mode = Mode::DistributedRemote;
  o.seed = args.seed;
  o.trace = args.trace;
  o.watchdog = std::chrono::milliseconds(static_cast<std::int64_t>(args.watchdog_seconds * 1000));
  o.null_quantum = args.null_quantum;
  o.hosts = load_host_map(args.hosts);
  const LpOutcome outcome = run_worker(s, args.lp, o);
  if (args.out) {
    write_file(*args.out, to_json(outcome));
  } else {
    std::cout << to_json(outcome) << "\n";
  }
  return 0;
}

int cmd_validate(const fs::path& path) {
  Scenario s;
  try {
    s = parse_scenario(read_file(path));
  } catch (const ParseError& e) {
    std::cerr << fmt::format("{}: {}\n", path.string(), e.what());
    return kValidationExit;
  }
  const auto problems = validation_problems(s);
  for (const auto& p : problems) std::cerr << fmt::format("{}: {}\n", path.string(), p);
  if (!problems.empty()) return kValidationExit;
  for (const LookaheadWarning& w : effective_lookahead_check(s)) {
    std::cerr << fmt::format("{}: warning: LP {}: {}\n", path.string(), w.lp_id, w.message);
  }
  std::cout << fmt::format("{}: ok ({} LPs, {} links)\n", path.string(), s.lps.size(), s.links.size());
  return 0;
}

struct PartitionArgs {
  fs::path model;
  std::size_t k = 2;
  std::vector<std::string> hosts;
  std::vector<std::string> pins;
  std::optional<fs::path> out;
  std::optional<fs::path> skeleton_dir;
};

int cmd_partition(const PartitionArgs& args) {
  try {
    const activity::ModelGraph graph = activity::parse_model(read_file(args.model));
    activity::Pins pins;
    for (const std::string& p : args.pins) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw UsageError(fmt::format("--pin expects leaf=index, got '{}'", p));
      try {
        pins[p.substr(0, eq)] = std::stoul(p.substr(eq + 1));
      } catch (const std::exception&) {
        throw UsageError(fmt::format("--pin expects leaf=index, got '{}'", p));
      }
    }
    const activity::Partition part = activity::partition(graph, args.k, pins);
    std::string text = activity::save_partition(part);
    if (!args.hosts.empty()) text += activity::save_mapping(activity::map_to_workstations(part, args.hosts));
    if (args.out) {
      write_file(*args.out, text);
    } else {
      std::cout << text;
    }
    if (args.skeleton_dir) {
      fs::create_directories(*args.skeleton_dir);
      for (std::size_t i = 0; i < part.blocks.size(); ++i) {
        const auto skeleton = activity::emit_skeleton(graph, part, i);
        write_file(*args.skeleton_dir / (part.blocks[i].id + ".dms"), activity::skeleton_text(skeleton));
      }
    }
    return 0;
  } catch (const activity::ActivityError& e) {
    std::cerr << fmt::format("{}: {}\n", args.model.string(), e.what());
    return kValidationExit;
  }
}

int cmd_diff(const fs::path& a, const fs::path& b, bool events) {
  TraceFile ta, tb;
  try {
    ta = parse_trace(read_file(a));
    tb = parse_trace(read_file(b));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::vector<std::string> lines = trace_diff(ta, tb);
  if (events) {
    auto more = event_trace_diff(ta, tb);
    lines.insert(lines.end(), more.begin(), more.end());
  }
  for (const auto& l : lines) std::cout << l << "\n";
  if (lines.empty()) {
    std::cout << fmt::format("identical: {} DATA messages, {} departure counts{}\n", ta.data.size(),
                             ta.departures.size(), events ? fmt::format(", {} events", ta.events.size()) : "");
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed manufacturing simulation"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "run a scenario");
  run_cmd->add_option("scenario", run_args.scenario, "scenario file")->required();
  run_cmd->add_option("--mode", run_args.mode, "seq, local or remote")->capture_default_str();
  run_cmd->add_option("--seed", run_args.seed, "master seed (overrides the scenario)");
  run_cmd->add_option("--trace", run_args.trace, "write the DATA/departure/event trace here");
  run_cmd->add_option("--report", run_args.report, "write the report here (.json, .csv or text)");
  run_cmd->add_option("--hosts", run_args.hosts, "LP to host:port map (remote mode)");
  run_cmd->add_option("--watchdog", run_args.watchdog_seconds, "seconds without progress before giving up")
      ->capture_default_str();
  run_cmd->add_option("--null-quantum", run_args.null_quantum, "events between null message rounds")
      ->capture_default_str();

  WorkerArgs worker_args;
  auto* worker_cmd = app.add_subcommand("worker", "run one LP of a remote deployment");
  worker_cmd->add_option("scenario", worker_args.scenario)->required();
  worker_cmd->add_option("--lp", worker_args.lp)->required();
  worker_cmd->add_option("--hosts", worker_args.hosts)->required();
  worker_cmd->add_option("--seed", worker_args.seed);
  worker_cmd->add_option("--out", worker_args.out, "write the LP outcome (JSON) here");
  worker_cmd->add_option("--watchdog", worker_args.watchdog_seconds)->capture_default_str();
  worker_cmd->add_option("--null-quantum", worker_args.null_quantum)->capture_default_str();
  worker_cmd->add_flag("--trace-events", worker_args.trace);

  fs::path validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "check a scenario file");
  validate_cmd->add_option("scenario", validate_path)->required();

  PartitionArgs part_args;
  auto* part_cmd = app.add_subcommand("partition", "split an activity model into k LPs");
  part_cmd->add_option("model", part_args.model, "activity model (.idef)")->required();
  part_cmd->add_option("-k", part_args.k, "number of LPs")->required();
  part_cmd->add_option("--hosts", part_args.hosts, "workstations host:port, one per LP")->delimiter(',');
  part_cmd->add_option("--pin", part_args.pins, "leaf=index constraints");
  part_cmd->add_option("--out", part_args.out, "write the partition here");
  part_cmd->add_option("--skeleton", part_args.skeleton_dir, "write one scenario fragment per LP here");

  fs::path diff_a, diff_b;
  bool diff_events = false;
  auto* diff_cmd = app.add_subcommand("diff", "compare two traces");
  diff_cmd->add_option("trace1", diff_a)->required();
  diff_cmd->add_option("trace2", diff_b)->required();
  diff_cmd->add_flag("--events", diff_events, "also compare the event traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kValidationExit;
  }

  try {
    if (*run_cmd) return cmd_run(run_args);
    if (*worker_cmd) return cmd_worker(worker_args);
    if (*validate_cmd) return cmd_validate(validate_path);
    if (*part_cmd) return cmd_partition(part_args);
    if (*diff_cmd) return cmd_diff(diff_a, diff_b, diff_events);
  } catch (const RunError& e) {
    std::cerr << "dms-sim: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const UsageError& e) {
    std::cerr << "dms-sim: " << e.what() << "\n";
    return kValidationExit;
  } catch (const std::exception& e) {
    std::cerr << "dms-sim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
