#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace mflab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed interval [lo, hi] with a point estimate inside it.
// For exact-tail quantities est == hi; for truncated series est == lo.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double est = 0.0;

  static Interval point(double v) { return {v, v, v}; }
  static Interval lower_bound(double v) { return {v, kInf, v}; }

  double width() const { return hi - lo; }
  bool contains(double v, double slack = 0.0) const {
    return v >= lo - slack && v <= hi + slack;
  }
  bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
};

inline Interval operator+(const Interval& a, const Interval& b) {
  return {a.lo + b.lo, a.hi + b.hi, a.est + b.est};
}

inline Interval operator*(double s, const Interval& a) {
  if (s >= 0) return {s * a.lo, s * a.hi, s * a.est};
  return {s * a.hi, s * a.lo, s * a.est};
}

// Quotient of nonnegative intervals, b.lo > 0.
inline Interval divide_nonneg(const Interval& a, const Interval& b) {
  double lo = b.hi > 0 && std::isfinite(b.hi) ? a.lo / b.hi : 0.0;
  double hi = b.lo > 0 ? a.hi / b.lo : kInf;
  double est = b.est > 0 ? a.est / b.est : kInf;
  return {lo, hi, est};
}

}  // namespace mflab
