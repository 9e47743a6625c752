#include "dms/orchestrator/report_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace dms::orchestrator {
namespace {

using nlohmann::json;

json report_json(const LocalReport& r) {
  json j;
  j["lp_id"] = r.lp_id;
  j["final_clock"] = r.final_clock.hours();
  j["events_executed"] = r.events_executed;
  j["resources"] = json::array();
  for (const ResourceStats& s : r.resources) {
    j["resources"].push_back({{"id", s.id},
                              {"capacity", s.capacity},
                              {"busy_time", s.busy_time},
                              {"utilization", s.utilization},
                              {"seizes", s.seizes}});
  }
  j["blocks"] = json::array();
  for (const BlockStats& b : r.blocks) {
    j["blocks"].push_back({{"id", b.id},
                           {"kind", std::string(to_string(b.kind))},
                           {"entities_in", b.entities_in},
                           {"entities_out", b.entities_out},
                           {"units_in", b.units_in},
                           {"units_out", b.units_out}});
  }
  j["departures"] = json::array();
  for (const DepartureStats& d : r.departures) {
    j["departures"].push_back({{"entity_kind", d.entity_kind}, {"entities", d.entities}, {"units", d.units}});
  }
  return j;
}

BlockKind block_kind(const std::string& text) {
  for (BlockKind k : {BlockKind::Create, BlockKind::CreatePort, BlockKind::Process, BlockKind::Batch,
                      BlockKind::Separate, BlockKind::PortSend, BlockKind::Dispose}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown block kind " + text);
}

LocalReport report_from(const json& j) {
  LocalReport r;
  r.lp_id = j.at("lp_id").get<std::string>();
  r.final_clock = SimTime{j.at("final_clock").get<double>()};
  r.events_executed = j.at("events_executed").get<std::uint64_t>();
  for (const json& s : j.at("resources")) {
    r.resources.push_back(ResourceStats{s.at("id").get<std::string>(), s.at("capacity").get<std::uint32_t>(),
                                        s.at("busy_time").get<double>(), s.at("utilization").get<double>(),
                                        s.at("seizes").get<std::uint64_t>()});
  }
  for (const json& b : j.at("blocks")) {
    r.blocks.push_back(BlockStats{b.at("id").get<std::string>(), block_kind(b.at("kind").get<std::string>()),
                                  b.at("entities_in").get<std::uint64_t>(), b.at("entities_out").get<std::uint64_t>(),
                                  b.at("units_in").get<std::uint64_t>(), b.at("units_out").get<std::uint64_t>()});
  }
  for (const json& d : j.at("departures")) {
    r.departures.push_back(DepartureStats{d.at("entity_kind").get<std::string>(), d.at("entities").get<std::uint64_t>(),
                                          d.at("units").get<std::uint64_t>()});
  }
  return r;
}

json counters_json(const sync::LpCounters& c) {
  return {{"data_sent", c.data_sent},           {"data_received", c.data_received},
          {"data_released", c.data_released},   {"nulls_sent", c.nulls_sent},
          {"nulls_suppressed", c.nulls_suppressed}, {"nulls_received", c.nulls_received},
          {"blocked_steps", c.blocked_steps},   {"late_messages", c.late_messages}};
}

sync::LpCounters counters_from(const json& j) {
  sync::LpCounters c;
  c.data_sent = j.at("data_sent");
  c.data_received = j.at("data_received");
  c.data_released = j.at("data_released");
  c.nulls_sent = j.at("nulls_sent");
  c.nulls_suppressed = j.at("nulls_suppressed");
  c.nulls_received = j.at("nulls_received");
  c.blocked_steps = j.at("blocked_steps");
  c.late_messages = j.at("late_messages");
  return c;
}

json outcome_json(const LpOutcome& o, bool full) {
  json j;
  j["lp_id"] = o.lp_id;
  j["status"] = std::string(to_string(o.status));
  if (!o.detail.empty()) j["detail"] = o.detail;
  j["counters"] = counters_json(o.counters);
  j["received_from"] = o.received_from;
  j["report"] = report_json(o.report);
  if (full) {
    j["sent"] = json::array();
    for (const sync::DataRecord& d : o.sent) j["sent"].push_back({d.timestamp, d.source, d.dest, d.body});
    j["trace"] = json::array();
    for (const TraceRecord& t : o.trace) j["trace"].push_back({t.time.hours(), t.block_id, t.entity_kind, t.units, t.seq});
  }
  return j;
}

std::uint64_t parse_u64(std::string_view text, std::size_t line) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(fmt::format("line {}: bad integer '{}'", line, text));
  }
  return v;
}

double parse_f64(std::string_view text, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(fmt::format("line {}: bad number '{}'", line, text));
  }
  return v;
}

// key=value fields in a fixed order.
std::vector<std::string_view> fields(std::string_view line, std::initializer_list<std::string_view> keys,
                                     std::size_t line_no) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (std::string_view key : keys) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    const std::size_t end = std::min(line.find(' ', pos), line.size());
    const std::string_view tok = line.substr(pos, end - pos);
    if (tok.size() <= key.size() || tok.substr(0, key.size()) != key || tok[key.size()] != '=') {
      throw std::invalid_argument(fmt::format("line {}: expected {}=", line_no, key));
    }
    out.push_back(tok.substr(key.size() + 1));
    pos = end;
  }
  if (line.find_first_not_of(' ', pos) != std::string_view::npos) {
    throw std::invalid_argument(fmt::format("line {}: trailing text", line_no));
  }
  return out;
}

std::string data_line(const sync::DataRecord& d) {
  return fmt::format("data t={} from={} to={} body={}", format_double(d.timestamp), d.source, d.dest, d.body);
}

std::string departures_line(const TraceFile::Departures& d) {
  return fmt::format("departures lp={} kind={} entities={} units={}", d.lp_id, d.entity_kind, d.entities, d.units);
}

// First index where the sorted sequences differ, reported with context.
template <typename T, typename Print>
void first_divergence(std::string_view what, const std::vector<T>& a, const std::vector<T>& b, Print print,
                      std::vector<std::string>& out) {
  const std::size_t n = std::min(a.size(), b.size());
  std::size_t i = 0;
  while (i < n && a[i] == b[i]) ++i;
  if (i == n && a.size() == b.size()) return;
  out.push_back(fmt::format("{} differ at entry {} ({} vs {} entries)", what, i + 1, a.size(), b.size()));
  if (i > 0) out.push_back("  = " + print(a[i - 1]));
  out.push_back("  < " + (i < a.size() ? print(a[i]) : std::string("(end)")));
  out.push_back("  > " + (i < b.size() ? print(b[i]) : std::string("(end)")));
}

}  // namespace

std::string to_json(const LpOutcome& outcome) { return outcome_json(outcome, true).dump(); }

LpOutcome outcome_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    LpOutcome o;
    o.lp_id = j.at("lp_id").get<std::string>();
    const std::string status = j.at("status").get<std::string>();
    o.status = status == "finished" ? LpStatus::Finished : status == "stopped" ? LpStatus::Stopped : LpStatus::Failed;
    o.detail = j.value("detail", "");
    o.counters = counters_from(j.at("counters"));
    o.received_from = j.at("received_from").get<std::map<std::string, std::uint64_t>>();
    o.report = report_from(j.at("report"));
    for (const json& d : j.at("sent")) {
      o.sent.push_back(sync::DataRecord{d.at(0).get<double>(), d.at(1).get<std::string>(), d.at(2).get<std::string>(),
                                        d.at(3).get<std::string>()});
    }
    for (const json& t : j.at("trace")) {
      o.trace.push_back(TraceRecord{SimTime{t.at(0).get<double>()}, o.lp_id, t.at(1).get<std::string>(),
                                    t.at(2).get<std::string>(), t.at(3).get<std::uint64_t>(),
                                    t.at(4).get<std::uint64_t>()});
    }
    return o;
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("bad LP outcome: {}", e.what()));
  }
}

std::string to_json(const GlobalReport& r, int indent) {
  json j;
  j["scenario"] = r.scenario;
  j["mode"] = std::string(to_string(r.mode));
  j["seed"] = r.seed;
  j["end_time"] = r.end_time.hours();
  j["wall_seconds"] = r.wall_seconds;
  j["events_executed"] = r.events_executed();
  j["links"] = json::array();
  for (const LinkCount& l : r.links) {
    j["links"].push_back({{"from", l.from},
                          {"to", l.to},
                          {"data_sent", l.data_sent},
                          {"data_received", l.data_received},
                          {"units_sent", l.units_sent}});
  }
  j["lps"] = json::array();
  for (const LpOutcome& o : r.lps) j["lps"].push_back(outcome_json(o, false));
  return j.dump(indent);
}

std::string to_text(const GlobalReport& r) {
  std::string out = fmt::format("scenario {}  mode {}  seed {}  end_time {}\nwall {:.3f} s, {} events\n", r.scenario,
                                to_string(r.mode), r.seed, format_double(r.end_time.hours()), r.wall_seconds,
                                r.events_executed());
  for (const LpOutcome& o : r.lps) {
    out += fmt::format("\nLP {} {}: {} DATA sent, {} received, {} nulls sent{}\n", o.lp_id, to_string(o.status),
                       o.counters.data_sent, o.counters.data_received, o.counters.nulls_sent,
                       o.detail.empty() ? "" : " (" + o.detail + ")");
    out += dms::to_text(o.report);
  }
  if (!r.links.empty()) {
    out += "\nlinks:\n";
    for (const LinkCount& l : r.links) {
      out += fmt::format("  {} -> {}  sent {}  received {}  units {}\n", l.from, l.to, l.data_sent, l.data_received,
                         l.units_sent);
    }
  }
  return out;
}

std::string to_csv(const GlobalReport& r) {
  std::vector<LocalReport> reports;
  for (const LpOutcome& o : r.lps) reports.push_back(o.report);
  std::string out = dms::to_csv(reports);
  for (const LinkCount& l : r.links) {
    const std::string object = fmt::format("link:{}->{}", l.from, l.to);
    out += fmt::format("global,{},data_sent,{}\n", object, l.data_sent);
    out += fmt::format("global,{},data_received,{}\n", object, l.data_received);
    out += fmt::format("global,{},units_sent,{}\n", object, l.units_sent);
  }
  return out;
}

TraceFile trace_file(const GlobalReport& report) {
  TraceFile t;
  t.data = report.data();
  for (const LpOutcome& o : report.lps) {
    for (const DepartureStats& d : o.report.departures) t.departures.push_back({o.lp_id, d.entity_kind, d.entities, d.units});
  }
  std::sort(t.departures.begin(), t.departures.end());
  t.events = report.trace();
  return t;
}

std::string write_trace(const TraceFile& t) {
  std::string out;
  for (const auto& d : t.data) out += data_line(d) + "\n";
  for (const auto& d : t.departures) out += departures_line(d) + "\n";
  for (const auto& e : t.events) out += format_trace_line(e) + "\n";
  return out;
}

TraceFile parse_trace(std::string_view text) {
  TraceFile t;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("data ")) {
      auto f = fields(line.substr(5), {"t", "from", "to", "body"}, line_no);
      t.data.push_back({parse_f64(f[0], line_no), std::string(f[1]), std::string(f[2]), std::string(f[3])});
    } else if (line.starts_with("departures ")) {
      auto f = fields(line.substr(11), {"lp", "kind", "entities", "units"}, line_no);
      t.departures.push_back(
          {std::string(f[0]), std::string(f[1]), parse_u64(f[2], line_no), parse_u64(f[3], line_no)});
    } else if (line.starts_with("t=")) {
      auto f = fields(line, {"t", "lp", "block", "entity_kind", "units", "seq"}, line_no);
      t.events.push_back({SimTime{parse_f64(f[0], line_no)}, std::string(f[1]), std::string(f[2]), std::string(f[3]),
                          parse_u64(f[4], line_no), parse_u64(f[5], line_no)});
    } else {
      throw std::invalid_argument(fmt::format("line {}: unrecognised trace line", line_no));
    }
  }
  std::sort(t.data.begin(), t.data.end());
  std::sort(t.departures.begin(), t.departures.end());
  return t;
}

TraceFile load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument(fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

std::vector<std::string> trace_diff(const TraceFile& a, const TraceFile& b) {
  std::vector<std::string> out;
  first_divergence("DATA messages", a.data, b.data, data_line, out);
  first_divergence("departures", a.departures, b.departures, departures_line, out);
  return out;
}

std::vector<std::string> trace_diff(const GlobalReport& a, const GlobalReport& b) {
  return trace_diff(trace_file(a), trace_file(b));
}

std::vector<std::string> event_trace_diff(const TraceFile& a, const TraceFile& b) {
  std::vector<std::string> out;
  first_divergence("events", a.events, b.events, format_trace_line, out);
  return out;
}

}  // namespace dms::orchestrator
