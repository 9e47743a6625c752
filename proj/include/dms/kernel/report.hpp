#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dms/kernel/model.hpp"
#include "dms/kernel/sim_time.hpp"

namespace dms {

struct ResourceStats {
  std::string id;
  std::uint32_t capacity = 1;
  double busy_time = 0.0;  // integral of the in-service count, hours
  double utilization = 0.0;
  std::uint64_t seizes = 0;
  friend bool operator==(const ResourceStats&, const ResourceStats&) = default;
};

struct BlockStats {
  std::string id;
  BlockKind kind = BlockKind::Dispose;
  std::uint64_t entities_in = 0;
  std::uint64_t entities_out = 0;
  std::uint64_t units_in = 0;
  std::uint64_t units_out = 0;
  friend bool operator==(const BlockStats&, const BlockStats&) = default;
};

struct DepartureStats {
  std::string entity_kind;
  std::uint64_t entities = 0;
  std::uint64_t units = 0;
  friend bool operator==(const DepartureStats&, const DepartureStats&) = default;
};

// Output of one LP (or one section of the flattened model).
struct LocalReport {
  std::string lp_id;
  SimTime final_clock{0.0};
  std::uint64_t events_executed = 0;
  std::vector<ResourceStats> resources;
  std::vector<BlockStats> blocks;
  std::vector<DepartureStats> departures;  // sorted by entity kind

  const BlockStats* block(std::string_view id) const;
  const ResourceStats* resource(std::string_view id) const;
  std::uint64_t departures_of(std::string_view kind) const;

  friend bool operator==(const LocalReport&, const LocalReport&) = default;
};

// One (lp_id, object_id, metric, value) row.
struct MetricRecord {
  std::string lp_id;
  std::string object_id;
  std::string metric;
  std::string value;
};

std::vector<MetricRecord> metric_records(const LocalReport& report);

// Aligned, human-readable listing of the metric records.
std::string to_text(const LocalReport& report);
// CSV with header `lp_id,object_id,metric,value`.
std::string to_csv(const std::vector<LocalReport>& reports);

}  // namespace dms
