#include "dms/kernel/report.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace dms {

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Create:
      return "create";
    case BlockKind::CreatePort:
      return "createport";
    case BlockKind::Process:
      return "process";
    case BlockKind::Batch:
      return "batch";
    case BlockKind::Separate:
      return "separate";
    case BlockKind::PortSend:
      return "portsend";
    case BlockKind::Dispose:
      return "dispose";
  }
  return "?";
}

const BlockStats* LocalReport::block(std::string_view id) const {
  auto it = std::find_if(blocks.begin(), blocks.end(), [&](const BlockStats& b) { return b.id == id; });
  return it == blocks.end() ? nullptr : &*it;
}

const ResourceStats* LocalReport::resource(std::string_view id) const {
  auto it = std::find_if(resources.begin(), resources.end(), [&](const ResourceStats& r) { return r.id == id; });
  return it == resources.end() ? nullptr : &*it;
}

std::uint64_t LocalReport::departures_of(std::string_view kind) const {
  for (const DepartureStats& d : departures) {
    if (d.entity_kind == kind) return d.entities;
  }
  return 0;
}

std::vector<MetricRecord> metric_records(const LocalReport& report) {
  std::vector<MetricRecord> out;
  auto add = [&](std::string object, std::string metric, std::string value) {
    out.push_back(MetricRecord{report.lp_id, std::move(object), std::move(metric), std::move(value)});
  };
  add("lp", "final_clock", format_time(report.final_clock));
  add("lp", "events_executed", std::to_string(report.events_executed));
  for (const ResourceStats& r : report.resources) {
    const std::string object = "resource:" + r.id;
    add(object, "capacity", std::to_string(r.capacity));
    add(object, "busy_time", format_double(r.busy_time));
    add(object, "utilization", format_double(r.utilization));
    add(object, "seizes", std::to_string(r.seizes));
  }
  for (const BlockStats& b : report.blocks) {
    const std::string object = "block:" + b.id;
    add(object, "entities_in", std::to_string(b.entities_in));
    add(object, "entities_out", std::to_string(b.entities_out));
    add(object, "units_in", std::to_string(b.units_in));
    add(object, "units_out", std::to_string(b.units_out));
  }
  for (const DepartureStats& d : report.departures) {
    const std::string object = "departures:" + d.entity_kind;
    add(object, "entities", std::to_string(d.entities));
    add(object, "units", std::to_string(d.units));
  }
  return out;
}

std::string to_text(const LocalReport& report) {
  const auto records = metric_records(report);
  std::size_t width = 0;
  for (const auto& r : records) width = std::max(width, r.object_id.size() + r.metric.size() + 1);
  std::string out = fmt::format("== LP {} ==\n", report.lp_id);
  for (const auto& r : records) {
    out += fmt::format("  {:<{}}  {}\n", r.object_id + "." + r.metric, width, r.value);
  }
  return out;
}

std::string to_csv(const std::vector<LocalReport>& reports) {
  std::string out = "lp_id,object_id,metric,value\n";
  for (const LocalReport& report : reports) {
    for (const auto& r : metric_records(report)) {
      out += fmt::format("{},{},{},{}\n", r.lp_id, r.object_id, r.metric, r.value);
    }
  }
  return out;
}

}  // namespace dms
