#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <stdexcept>
#include <string>

namespace dms {

// Simulation time in hours. Durations use the same type.
class SimTime {
 public:
  constexpr SimTime() = default;
  constexpr explicit SimTime(double hours) : hours_(hours) {}

  constexpr double hours() const { return hours_; }

  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime(a.hours_ + b.hours_); }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime(a.hours_ - b.hours_); }
  SimTime& operator+=(SimTime other) {
    hours_ += other.hours_;
    return *this;
  }

  friend constexpr auto operator<=>(SimTime, SimTime) = default;

 private:
  double hours_ = 0.0;
};

// A time value that may also be the end-of-time sentinel. Used for channel
// clocks and safe times, where "no further constraint" must not be encoded
// as a numeric infinity.
class TimeBound {
 public:
  constexpr TimeBound() = default;
  constexpr explicit TimeBound(SimTime t) : time_(t), end_(false) {}

  static constexpr TimeBound end_of_time() {
    TimeBound b;
    b.end_ = true;
    return b;
  }

  constexpr bool is_end() const { return end_; }
  SimTime time() const {
    if (end_) throw std::logic_error("TimeBound::time() on end-of-time sentinel");
    return time_;
  }

  friend constexpr bool operator==(const TimeBound& a, const TimeBound& b) {
    if (a.end_ || b.end_) return a.end_ == b.end_;
    return a.time_ == b.time_;
  }
  friend constexpr std::strong_ordering operator<=>(const TimeBound& a, const TimeBound& b) {
    if (a.end_ && b.end_) return std::strong_ordering::equal;
    if (a.end_) return std::strong_ordering::greater;
    if (b.end_) return std::strong_ordering::less;
    if (a.time_ < b.time_) return std::strong_ordering::less;
    if (b.time_ < a.time_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  friend constexpr bool operator<(const TimeBound& a, SimTime t) { return !a.end_ && a.time_ < t; }
  friend constexpr bool operator<=(SimTime t, const TimeBound& b) { return b.end_ || t <= b.time_; }
  friend constexpr bool operator<(SimTime t, const TimeBound& b) { return b.end_ || t < b.time_; }

 private:
  SimTime time_{};
  bool end_ = false;
};

inline bool is_valid_time(double hours) { return std::isfinite(hours) && hours >= 0.0; }

// 17 significant digits: enough to round-trip any binary64 value.
std::string format_time(SimTime t);
std::string format_double(double v);

}  // namespace dms
