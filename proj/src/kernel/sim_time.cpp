#include "dms/kernel/sim_time.hpp"

#include <fmt/format.h>

namespace dms {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

std::string format_time(SimTime t) { return format_double(t.hours()); }

}  // namespace dms
