#pragma once

// Total-variation utilities. Throughout, tv(p, q) is the unnormalized norm
// sum |p_i - q_i| (at most 2); the usual distance d_TV is half of it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "lcpkit/quadrature.hpp"
#include "lcpkit/sampler.hpp"

namespace lcpkit {

class DiscreteDist {
 public:
  static constexpr double kSumTolerance = 1e-12;

  DiscreteDist() = default;

  // Support must be sorted and distinct, probabilities nonnegative and
  // summing to one.
  DiscreteDist(std::vector<double> support, std::vector<double> probs)
      : support_(std::move(support)), probs_(std::move(probs)) {
    if (support_.size() != probs_.size() || support_.empty()) {
      throw std::invalid_argument("DiscreteDist: support and probabilities must match and be nonempty");
    }
    CompensatedSum total;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!(probs_[i] >= 0.0) || !std::isfinite(support_[i])) {
        throw std::invalid_argument("DiscreteDist: probabilities must be nonnegative");
      }
      if (i > 0 && !(support_[i] > support_[i - 1])) {
        throw std::invalid_argument("DiscreteDist: support must be sorted and distinct");
      }
      total.add(probs_[i]);
    }
    if (std::abs(total.value() - 1.0) > kSumTolerance) {
      throw std::invalid_argument("DiscreteDist: probabilities must sum to 1");
    }
  }

  // Builds a distribution from unsorted (value, weight) pairs, merging
  // repeated values and normalizing the weights.
  static DiscreteDist from_weights(std::vector<std::pair<double, double>> pairs) {
    std::map<double, CompensatedSum> merged;
    CompensatedSum total;
    for (const auto& [x, w] : pairs) {
      if (!(w >= 0.0)) {
        throw std::invalid_argument("DiscreteDist: weights must be nonnegative");
      }
      merged[x].add(w);
      total.add(w);
    }
    if (!(total.value() > 0.0)) {
      throw std::invalid_argument("DiscreteDist: total weight must be positive");
    }
    std::vector<double> s;
    std::vector<double> p;
    for (const auto& [x, w] : merged) {
      s.push_back(x);
      p.push_back(w.value() / total.value());
    }
    // Push the rounding residue into the largest cell.
    CompensatedSum check;
    for (double v : p) {
      check.add(v);
    }
    auto big = std::max_element(p.begin(), p.end());
    *big += 1.0 - check.value();
    return DiscreteDist(std::move(s), std::move(p));
  }

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return support_.size(); }

  double prob_at(double x) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), x);
    if (it == support_.end() || *it != x) {
      return 0.0;
    }
    return probs_[static_cast<std::size_t>(it - support_.begin())];
  }

  // The law of X + a.
  DiscreteDist shifted(double a) const {
    std::vector<double> s(support_);
    for (double& x : s) {
      x += a;
    }
    return DiscreteDist(std::move(s), probs_);
  }

 private:
  std::vector<double> support_;
  std::vector<double> probs_;
};

namespace detail {

// Walks the merged support of p and q in order.
template <typename F>
void merged_walk(const DiscreteDist& p, const DiscreteDist& q, F&& visit) {
  const auto& sp = p.support();
  const auto& sq = q.support();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < sp.size() || j < sq.size()) {
    if (j == sq.size() || (i < sp.size() && sp[i] < sq[j])) {
      visit(sp[i], p.probs()[i], 0.0);
      ++i;
    } else if (i == sp.size() || sq[j] < sp[i]) {
      visit(sq[j], 0.0, q.probs()[j]);
      ++j;
    } else {
      visit(sp[i], p.probs()[i], q.probs()[j]);
      ++i;
      ++j;
    }
  }
}

}  // namespace detail

inline double tv_discrete(const DiscreteDist& p, const DiscreteDist& q) {
  CompensatedSum acc;
  detail::merged_walk(p, q, [&](double, double a, double b) { acc.add(std::abs(a - b)); });
  return std::min(2.0, acc.value());
}

// Sampler for the maximal coupling of p and q: x == y with probability
// 1 - tv(p, q)/2, the largest value any coupling can reach.
class MaximalCoupling {
 public:
  MaximalCoupling(const DiscreteDist& p, const DiscreteDist& q) {
    CompensatedSum common;
    CompensatedSum p_excess;
    CompensatedSum q_excess;
    detail::merged_walk(p, q, [&](double x, double a, double b) {
      const double m = std::min(a, b);
      if (m > 0.0) {
        common_x_.push_back(x);
        common_w_.push_back(m);
        common.add(m);
      }
      if (a > b) {
        p_x_.push_back(x);
        p_w_.push_back(a - b);
        p_excess.add(a - b);
      } else if (b > a) {
        q_x_.push_back(x);
        q_w_.push_back(b - a);
        q_excess.add(b - a);
      }
    });
    meet_ = std::clamp(common.value(), 0.0, 1.0);
    common_ = AliasTable(common_w_);
    p_rest_ = AliasTable(p_w_);
    q_rest_ = AliasTable(q_w_);
  }

  // Sum of min(p, q), equal to 1 - tv(p, q)/2.
  double meet_probability() const { return meet_; }

  template <typename Rng>
  std::pair<double, double> operator()(Rng& rng) const {
    const bool together =
        p_x_.empty() || q_x_.empty() || (!common_x_.empty() && rng.uniform() < meet_);
    if (together) {
      const double x = common_x_[common_.pick(rng.uniform())];
      return {x, x};
    }
    const double x = p_x_[p_rest_.pick(rng.uniform())];
    const double y = q_x_[q_rest_.pick(rng.uniform())];
    return {x, y};
  }

 private:
  double meet_ = 0.0;
  std::vector<double> common_x_, common_w_, p_x_, p_w_, q_x_, q_w_;
  AliasTable common_, p_rest_, q_rest_;
};

template <typename Rng>
std::pair<double, double> maximal_coupling(const DiscreteDist& p, const DiscreteDist& q, Rng& rng) {
  return MaximalCoupling(p, q)(rng);
}

using Matrix = std::vector<std::vector<double>>;

inline void require_stochastic(const Matrix& P, std::size_t n, double tol = 1e-12) {
  if (P.size() != n) {
    throw std::invalid_argument("kernel_contraction: matrix size does not match the state space");
  }
  for (const auto& row : P) {
    if (row.size() != n) {
      throw std::invalid_argument("kernel_contraction: matrix must be square");
    }
    CompensatedSum s;
    for (double v : row) {
      if (!(v >= 0.0)) {
        throw std::invalid_argument("kernel_contraction: negative transition probability");
      }
      s.add(v);
    }
    if (std::abs(s.value() - 1.0) > tol) {
      throw std::invalid_argument("kernel_contraction: rows must sum to 1");
    }
  }
}

// Pushes p and q (probability vectors on states 0..n-1) through P for k
// steps. Entry 0 is the initial tv, entry j the tv after j steps.
inline std::vector<double> kernel_contraction(std::vector<double> p, std::vector<double> q,
                                              const Matrix& P, std::size_t steps) {
  const std::size_t n = p.size();
  if (q.size() != n || n == 0) {
    throw std::invalid_argument("kernel_contraction: p and q must have the state-space size");
  }
  require_stochastic(P, n);
  auto tv = [&]() {
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) {
      s.add(std::abs(p[i] - q[i]));
    }
    return s.value();
  };
  auto step = [&](const std::vector<double>& v) {
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
      CompensatedSum s;
      for (std::size_t i = 0; i < n; ++i) {
        s.add(v[i] * P[i][j]);
      }
      out[j] = s.value();
    }
    return out;
  };
  std::vector<double> seq{tv()};
  for (std::size_t k = 0; k < steps; ++k) {
    p = step(p);
    q = step(q);
    seq.push_back(tv());
  }
  return seq;
}

// A probability density supported on [lo, hi]. `kinks` lists interior points
// where f or its derivative jumps; quadrature splits there.
struct DensityFn {
  std::function<double(double)> f;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> kinks;

  double operator()(double x) const { return (x < lo || x > hi) ? 0.0 : f(x); }

  static DensityFn uniform(double lo = 0.0, double hi = 1.0) {
    if (!(hi > lo)) {
      throw std::invalid_argument("DensityFn::uniform: empty interval");
    }
    const double h = 1.0 / (hi - lo);
    return {[h](double) { return h; }, lo, hi, {}};
  }
};

// ||mu_a - mu|| = integral of |f(x + a) - f(x)| dx for mu with density f.
inline double tv_density_shift(const DensityFn& f, double a, double abs_tol = 1e-9) {
  if (!std::isfinite(a)) {
    throw std::invalid_argument("tv_density_shift: shift must be finite");
  }
  if (a == 0.0) {
    return 0.0;
  }
  const double lo = std::min(f.lo, f.lo - a);
  const double hi = std::max(f.hi, f.hi - a);
  std::vector<double> breaks{f.lo, f.hi, f.lo - a, f.hi - a};
  for (double k : f.kinks) {
    breaks.push_back(k);
    breaks.push_back(k - a);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double x) { return !(x > lo && x < hi); }),
               breaks.end());
  auto integrand = [&](double x) { return std::abs(f(x + a) - f(x)); };
  const double pieces = static_cast<double>(breaks.size() + 1);
  // Panels stop just short of each breakpoint so a jump in f is never
  // sampled from the wrong side.
  CompensatedSum total;
  double x0 = lo;
  breaks.push_back(hi);
  for (double x1 : breaks) {
    const double w = x1 - x0;
    const double shrink = w * 1e-15;
    total.add(adaptive_simpson(integrand, x0 + shrink, x1 - shrink, abs_tol / pieces));
    x0 = x1;
  }
  return std::clamp(total.value(), 0.0, 2.0);
}

struct ProfilePoint {
  double a = 0.0;
  double tv = 0.0;
};

using TranslationTarget = std::variant<DiscreteDist, DensityFn>;

// The curve a -> ||mu_a - mu|| on the given grid. For an atomic mu the
// value is computed exactly on the merged support.
inline std::vector<ProfilePoint> translation_profile(const TranslationTarget& mu,
                                                     std::span<const double> a_grid,
                                                     double abs_tol = 1e-9) {
  std::vector<ProfilePoint> out;
  out.reserve(a_grid.size());
  for (double a : a_grid) {
    if (!std::isfinite(a)) {
      throw std::invalid_argument("translation_profile: grid values must be finite");
    }
    double tv = 0.0;
    if (const auto* d = std::get_if<DiscreteDist>(&mu)) {
      tv = a == 0.0 ? 0.0 : tv_discrete(d->shifted(-a), *d);
    } else {
      tv = tv_density_shift(std::get<DensityFn>(mu), a, abs_tol);
    }
    out.push_back({a, tv});
  }
  return out;
}

// Histogram estimate of tv between two samples on bins [k w, (k+1) w).
// Finite samples inflate the estimate (independent noise never cancels), so
// it is safe on the lower side of an inequality only once that noise is
// accounted for; binning itself can only shrink it.
inline double tv_empirical(std::span<const double> xs, std::span<const double> ys,
                           double bin_width) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
    throw std::invalid_argument("tv_empirical: bin width must be positive");
  }
  if (xs.empty() || ys.empty()) {
    throw std::invalid_argument("tv_empirical: both samples must be nonempty");
  }
  auto key = [&](double v) {
    const double k = std::floor(v / bin_width);
    if (!(std::abs(k) < 9.0e18)) {
      throw std::invalid_argument("tv_empirical: sample out of binning range");
    }
    return static_cast<std::int64_t>(k);
  };
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> counts;
  for (double v : xs) {
    ++counts[key(v)].first;
  }
  for (double v : ys) {
    ++counts[key(v)].second;
  }
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  CompensatedSum acc;
  for (const auto& [k, c] : counts) {
    acc.add(std::abs(static_cast<double>(c.first) / nx - static_cast<double>(c.second) / ny));
  }
  return std::min(2.0, acc.value());
}

}  // namespace lcpkit
