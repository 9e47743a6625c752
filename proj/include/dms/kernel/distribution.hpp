#pragma once

#include <string>
#include <string_view>

#include "dms/kernel/rng.hpp"

namespace dms {

enum class DistributionKind { Constant, Uniform, Exponential, Triangular };

// Non-negative service / inter-arrival time distribution (hours).
//
// Text form, as used in scenario files:
//   const(v)   uniform(a,b)   expo(mean)   tria(a,m,b)
class Distribution {
 public:
  static Distribution constant(double value);
  static Distribution uniform(double low, double high);
  static Distribution exponential(double mean);
  static Distribution triangular(double low, double mode, double high);

  // Throws std::invalid_argument on unknown kinds or out-of-range parameters.
  static Distribution parse(std::string_view text);

  DistributionKind kind() const { return kind_; }
  double p1() const { return p1_; }
  double p2() const { return p2_; }
  double p3() const { return p3_; }

  double mean() const;
  // Greatest value every variate is guaranteed to be at or above.
  double lower_bound() const;
  // True when the support reaches down to zero with no positive floor
  // (exponential); such a distribution gives no lookahead.
  bool unbounded_below() const { return kind_ == DistributionKind::Exponential; }

  double sample(RandomStream& rng) const;

  std::string to_string() const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  Distribution(DistributionKind kind, double p1, double p2, double p3) : kind_(kind), p1_(p1), p2_(p2), p3_(p3) {}

  DistributionKind kind_ = DistributionKind::Constant;
  double p1_ = 0.0;
  double p2_ = 0.0;
  double p3_ = 0.0;
};

}  // namespace dms
