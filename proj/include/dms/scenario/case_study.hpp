#pragma once

#include "dms/scenario/scenario.hpp"

namespace dms::case_study {

// Quantities fixed by the three-firm case.
inline constexpr std::uint64_t kBatchSize = 1000;
inline constexpr std::uint64_t kSeparateAdds = 999;
inline constexpr double kTransferHours = 10.0;
inline constexpr double kEndTime = 5000.0;

// Everything below is illustrative: the case fixes no arrival or service
// data, so these values were chosen for this implementation.
struct Illustrative {
  std::uint64_t seed = 20070601;

  // Firm A: parts X and Z, plus its own product PA.
  const char* x_interarrival = "uniform(0.15,0.25)";
  const char* x_service = "uniform(0.1,0.18)";
  const char* z_interarrival = "uniform(0.3,0.5)";
  const char* z_service = "tria(0.2,0.3,0.35)";
  const char* pa_interarrival = "expo(2)";
  const char* pa_service = "uniform(1,1.8)";
  double a_lookahead = 0.1;

  // Firm B: expensive unit for X, part Y, XY assembly, product PB.
  const char* x_unit_service = "uniform(60,90)";
  const char* xy_assembly = "tria(20,30,40)";
  const char* y_interarrival = "uniform(180,220)";
  const char* y_service = "uniform(40,60)";
  const char* y_fit = "const(5)";
  const char* pb_interarrival = "expo(3)";
  const char* pb_service = "uniform(1.5,2.5)";
  double b_lookahead = 50.0;

  // Firm C: Z and XY processing, final XYZ assembly, product PC.
  const char* z_cell_service = "uniform(20,30)";
  const char* z_fit = "const(5)";
  const char* xy_cell_service = "uniform(30,45)";
  const char* xyz_assembly = "tria(20,25,35)";
  const char* pc_interarrival = "expo(2.5)";
  const char* pc_service = "uniform(1,2)";
  double c_lookahead = 20.0;
};

Scenario build_case_study(const Illustrative& values = {});

}  // namespace dms::case_study
