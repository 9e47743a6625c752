#include "dms/kernel/distribution.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "dms/kernel/sim_time.hpp"

namespace dms {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

double parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(fmt::format("bad number '{}'", text));
  }
  return value;
}

}  // namespace

Distribution Distribution::constant(double value) {
  require(finite_nonneg(value), fmt::format("const({}): value must be finite and >= 0", value));
  return Distribution(DistributionKind::Constant, value, 0.0, 0.0);
}

Distribution Distribution::uniform(double low, double high) {
  require(finite_nonneg(low) && std::isfinite(high) && low <= high,
          fmt::format("uniform({},{}): need 0 <= a <= b", low, high));
  return Distribution(DistributionKind::Uniform, low, high, 0.0);
}

Distribution Distribution::exponential(double mean) {
  require(std::isfinite(mean) && mean > 0.0, fmt::format("expo({}): mean must be > 0", mean));
  return Distribution(DistributionKind::Exponential, mean, 0.0, 0.0);
}

Distribution Distribution::triangular(double low, double mode, double high) {
  require(finite_nonneg(low) && std::isfinite(mode) && std::isfinite(high) && low <= mode && mode <= high,
          fmt::format("tria({},{},{}): need 0 <= a <= m <= b", low, mode, high));
  return Distribution(DistributionKind::Triangular, low, mode, high);
}

Distribution Distribution::parse(std::string_view text) {
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.empty() || text.back() != ')') {
    throw std::invalid_argument(fmt::format("bad distribution '{}'", text));
  }
  const std::string_view name = text.substr(0, open);
  std::string_view inner = text.substr(open + 1, text.size() - open - 2);
  std::vector<double> args;
  while (true) {
    const auto comma = inner.find(',');
    args.push_back(parse_number(inner.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  auto arity = [&](std::size_t n) {
    if (args.size() != n) {
      throw std::invalid_argument(fmt::format("{} takes {} parameter(s), got {}", name, n, args.size()));
    }
  };
  if (name == "const") {
    arity(1);
    return constant(args[0]);
  }
  if (name == "uniform") {
    arity(2);
    return uniform(args[0], args[1]);
  }
  if (name == "expo") {
    arity(1);
    return exponential(args[0]);
  }
  if (name == "tria") {
    arity(3);
    return triangular(args[0], args[1], args[2]);
  }
  throw std::invalid_argument(fmt::format("unknown distribution '{}'", name));
}

double Distribution::mean() const {
  switch (kind_) {
    case DistributionKind::Constant:
      return p1_;
    case DistributionKind::Uniform:
      return 0.5 * (p1_ + p2_);
    case DistributionKind::Exponential:
      return p1_;
    case DistributionKind::Triangular:
      return (p1_ + p2_ + p3_) / 3.0;
  }
  return 0.0;
}

double Distribution::lower_bound() const {
  switch (kind_) {
    case DistributionKind::Constant:
    case DistributionKind::Uniform:
    case DistributionKind::Triangular:
      return p1_;
    case DistributionKind::Exponential:
      return 0.0;
  }
  return 0.0;
}

double Distribution::sample(RandomStream& rng) const {
  switch (kind_) {
    case DistributionKind::Constant:
      return p1_;
    case DistributionKind::Uniform:
      return p1_ + (p2_ - p1_) * rng.uniform01();
    case DistributionKind::Exponential:
      return -p1_ * std::log1p(-rng.uniform01());
    case DistributionKind::Triangular: {
      // Inverse CDF.
      const double a = p1_, m = p2_, b = p3_;
      const double u = rng.uniform01();
      if (b == a) return a;
      const double split = (m - a) / (b - a);
      if (u < split) return a + std::sqrt(u * (b - a) * (m - a));
      return b - std::sqrt((1.0 - u) * (b - a) * (b - m));
    }
  }
  return 0.0;
}

std::string Distribution::to_string() const {
  switch (kind_) {
    case DistributionKind::Constant:
      return fmt::format("const({})", format_double(p1_));
    case DistributionKind::Uniform:
      return fmt::format("uniform({},{})", format_double(p1_), format_double(p2_));
    case DistributionKind::Exponential:
      return fmt::format("expo({})", format_double(p1_));
    case DistributionKind::Triangular:
      return fmt::format("tria({},{},{})", format_double(p1_), format_double(p2_), format_double(p3_));
  }
  return {};
}

}  // namespace dms
