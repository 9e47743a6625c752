#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dms/orchestrator/run.hpp"

namespace dms::orchestrator {

std::string to_json(const GlobalReport& report, int indent = 2);
std::string to_json(const LpOutcome& outcome);
// Inverse of to_json(LpOutcome); how workers hand results to the launcher.
LpOutcome outcome_from_json(std::string_view text);

std::string to_text(const GlobalReport& report);
// Per-LP metric rows plus `link:<from>-><to>` rows under lp_id "global".
std::string to_csv(const GlobalReport& report);

// What two runs are compared on: DATA messages, departures per LP and
// (optionally) the event trace.
struct TraceFile {
  struct Departures {
    std::string lp_id;
    std::string entity_kind;
    std::uint64_t entities = 0;
    std::uint64_t units = 0;
    friend auto operator<=>(const Departures&, const Departures&) = default;
  };
  std::vector<sync::DataRecord> data;  // sorted
  std::vector<Departures> departures;  // sorted
  std::vector<TraceRecord> events;     // merged order

  friend bool operator==(const TraceFile&, const TraceFile&) = default;
};

TraceFile trace_file(const GlobalReport& report);
// `data t=<ts> from=<lp> to=<lp> body=<text>`,
// `departures lp=<lp> kind=<kind> entities=<n> units=<n>` and event lines.
std::string write_trace(const TraceFile& trace);
// Throws std::invalid_argument with the line number.
TraceFile parse_trace(std::string_view text);
TraceFile load_trace(const std::filesystem::path& path);

// Empty iff DATA multisets and departure counts match. Otherwise the first
// divergence of each differing section, with neighbouring lines for context.
std::vector<std::string> trace_diff(const TraceFile& a, const TraceFile& b);
std::vector<std::string> trace_diff(const GlobalReport& a, const GlobalReport& b);
// Same, for the event traces.
std::vector<std::string> event_trace_diff(const TraceFile& a, const TraceFile& b);

}  // namespace dms::orchestrator
