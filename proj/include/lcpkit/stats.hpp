#pragma once

// Monte Carlo summaries: means with normal intervals, proportions with Wilson
// intervals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "lcpkit/quadrature.hpp"

namespace lcpkit {

struct Estimate {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double censored_fraction = 0.0;

  bool overlaps(const Estimate& o) const { return !(ci_hi < o.ci_lo || o.ci_hi < ci_lo); }
};

// Running mean/variance that stays order-reproducible.
class MeanAccumulator {
 public:
  void add(double v) {
    ++n_;
    sum_.add(v);
    sum_sq_.add(v * v);
  }
  std::size_t count() const { return n_; }
  double mean() const { return n_ ? sum_.value() / static_cast<double>(n_) : 0.0; }
  double variance() const {
    if (n_ < 2) {
      return 0.0;
    }
    const double m = mean();
    const double v = (sum_sq_.value() - static_cast<double>(n_) * m * m) /
                     static_cast<double>(n_ - 1);
    return std::max(v, 0.0);
  }
  double std_error_of_mean() const {
    return n_ ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  CompensatedSum sum_;
  CompensatedSum sum_sq_;
};

inline Estimate make_mean_estimate(const MeanAccumulator& acc, std::size_t censored = 0) {
  Estimate e;
  e.n = acc.count();
  e.mean = acc.mean();
  e.std_error = acc.std_error_of_mean();
  e.ci_lo = e.mean - 1.96 * e.std_error;
  e.ci_hi = e.mean + 1.96 * e.std_error;
  const std::size_t total = e.n + censored;
  e.censored_fraction = total ? static_cast<double>(censored) / static_cast<double>(total) : 0.0;
  return e;
}

inline Estimate estimate_mean(std::span<const double> values, std::size_t censored = 0) {
  MeanAccumulator acc;
  for (double v : values) {
    acc.add(v);
  }
  return make_mean_estimate(acc, censored);
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96) {
  if (n == 0) {
    throw std::invalid_argument("wilson_interval: empty sample");
  }
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline Estimate estimate_proportion(std::size_t successes, std::size_t n) {
  const Interval w = wilson_interval(successes, n);
  Estimate e;
  e.n = n;
  e.mean = static_cast<double>(successes) / static_cast<double>(n);
  e.std_error = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(n));
  e.ci_lo = std::min(w.lo, e.mean);
  e.ci_hi = std::max(w.hi, e.mean);
  return e;
}

}  // namespace lcpkit
