#pragma once

// Monte Carlo estimators over batches of coupled paths, plus the checks that
// compare them with the coupling bounds. Paths run in parallel but results
// are stored by path index and reduced in index order, so every number is
// independent of the worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lcpkit/coupling.hpp"
#include "lcpkit/measure.hpp"
#include "lcpkit/sampler.hpp"
#include "lcpkit/stats.hpp"
#include "lcpkit/tvkit.hpp"

namespace lcpkit {

// Calls fn(i) for i in [0, n) on `workers` threads; out[i] = fn(i).
template <typename F>
auto run_indexed(std::size_t n, unsigned workers, F&& fn) {
  using T = std::decay_t<decltype(fn(std::size_t{0}))>;
  std::vector<T> out(n);
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = fn(i);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) {
        return;
      }
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) {
          error = std::current_exception();
        }
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (unsigned k = 0; k < w; ++k) {
    pool.emplace_back(work);
  }
  for (auto& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
  return out;
}

struct PathBatch {
  double a = 0.0;
  SimConfig cfg;
  std::vector<CoupledPath> paths;
};

// Paths 0..n-1 from one starting gap. Z samples are dropped unless asked
// for, which keeps large batches small.
inline PathBatch simulate_batch(const CouplingModel& model, double a, const SimConfig& cfg,
                                std::size_t n, CoupleOptions opts) {
  cfg.validate();
  PathBatch b{a, cfg, {}};
  b.paths = run_indexed(n, cfg.workers, [&](std::size_t i) {
    return simulate_coupled(model, a, cfg, static_cast<std::uint64_t>(i), opts);
  });
  return b;
}

struct BatchSummary {
  double a = 0.0;
  std::size_t n = 0;
  double p_coupled = 0.0;
  double p_exceeded = 0.0;
  double p_stalled = 0.0;
  double p_censored = 0.0;
  // Mean over paths whose tau_bar was observed; censoring reported inside.
  Estimate tau_bar;
};

inline BatchSummary summarize(const PathBatch& batch) {
  BatchSummary s;
  s.a = batch.a;
  s.n = batch.paths.size();
  if (s.n == 0) {
    throw std::invalid_argument("summarize: empty batch");
  }
  std::size_t counts[4] = {0, 0, 0, 0};
  MeanAccumulator tau;
  std::size_t censored = 0;
  for (const auto& p : batch.paths) {
    ++counts[static_cast<int>(p.exit_class)];
    if (p.tau_bar) {
      tau.add(*p.tau_bar);
    } else {
      ++censored;
    }
  }
  const double n = static_cast<double>(s.n);
  s.p_coupled = static_cast<double>(counts[0]) / n;
  s.p_exceeded = static_cast<double>(counts[1]) / n;
  s.p_stalled = static_cast<double>(counts[2]) / n;
  s.p_censored = static_cast<double>(counts[3]) / n;
  s.tau_bar = make_mean_estimate(tau, censored);
  return s;
}

inline Estimate estimate_tau_bar(const PathBatch& batch) { return summarize(batch).tau_bar; }

inline Estimate estimate_tau_bar(const CouplingModel& model, double a, const SimConfig& cfg,
                                 std::size_t n) {
  CoupleOptions opts;
  opts.stop = StopRule::tau_bar;
  opts.track_levels = false;
  opts.record_z = false;
  return estimate_tau_bar(simulate_batch(model, a, cfg, n, opts));
}

// Checks E(tau_bar ^ H) <= C (E h(Z at tau_bar ^ H) - h(a)) with h the convex
// potential built on eta(r/2). Each path contributes
// d = (tau_bar ^ H) - C (h(Z) - h(a)) and the check is mean(d) <= 4 se(d).
struct TauBarBound {
  double a = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double std_error = 0.0;
  double censored_fraction = 0.0;
  bool pass = false;
};

inline constexpr double kTauBarConstant = 16.0;

inline TauBarBound tau_bar_bound_check(const PathBatch& batch, const RhoProfile& profile,
                                       double C = kTauBarConstant) {
  if (!profile.verdict().holds()) {
    throw std::domain_error("tau_bar_bound_check: requires a measure satisfying the condition");
  }
  TauBarBound r;
  r.a = batch.a;
  if (batch.a >= 1.0) {
    r.pass = true;
    return r;
  }
  const Potential h = profile.potential(0.5);
  const double h_a = h(batch.a);
  MeanAccumulator lhs;
  MeanAccumulator gain;
  MeanAccumulator diff;
  std::size_t censored = 0;
  for (const auto& p : batch.paths) {
    const double tau = p.tau_bar_or_end();
    const double g = h(p.z_at_stop()) - h_a;
    censored += p.tau_bar ? 0 : 1;
    lhs.add(tau);
    gain.add(g);
    diff.add(tau - C * g);
  }
  r.lhs = lhs.mean();
  r.std_error = diff.std_error_of_mean();
  r.rhs = C * gain.mean() + 4.0 * r.std_error;
  r.censored_fraction = static_cast<double>(censored) / static_cast<double>(batch.paths.size());
  r.pass = diff.mean() <= 4.0 * r.std_error;
  return r;
}

inline TauBarBound tau_bar_bound_check(const CouplingModel& model, double a, const SimConfig& cfg,
                                       std::size_t n, double C = kTauBarConstant) {
  if (!model.profile().verdict().holds()) {
    throw std::domain_error("tau_bar_bound_check: requires a measure satisfying the condition");
  }
  CoupleOptions opts;
  opts.stop = StopRule::tau_bar;
  opts.track_levels = false;
  opts.record_z = false;
  return tau_bar_bound_check(simulate_batch(model, a, cfg, n, opts), model.profile(), C);
}

// Checks P(T > s) <= E(tau_bar ^ H)/s + a for H >= s. Per path
// d = [T > s] - (tau_bar ^ H)/s and the check is mean(d) <= a + 4 se(d).
struct TailBound {
  double a = 0.0;
  double eps_time = 0.0;
  double p_hat = 0.0;
  double p_std_error = 0.0;
  double mean_tau_bar = 0.0;
  double bound = 0.0;
  bool pass = false;
};

// Batch must come from the coupling stop rule run to at least eps_time.
inline TailBound tail_bound_check(const PathBatch& batch, double eps_time) {
  if (!(eps_time > 0.0)) {
    throw std::invalid_argument("tail_bound_check: eps_time must be positive");
  }
  if (batch.paths.empty()) {
    throw std::invalid_argument("tail_bound_check: empty batch");
  }
  TailBound r;
  r.a = batch.a;
  r.eps_time = eps_time;
  MeanAccumulator late;
  MeanAccumulator tau;
  MeanAccumulator diff;
  for (const auto& p : batch.paths) {
    const double ind = stopping_times(p, eps_time).coupling_after ? 1.0 : 0.0;
    const double t = p.tau_bar_or_end();
    late.add(ind);
    tau.add(t);
    diff.add(ind - t / eps_time);
  }
  r.p_hat = late.mean();
  r.p_std_error = late.std_error_of_mean();
  r.mean_tau_bar = tau.mean();
  const double se = diff.std_error_of_mean();
  r.bound = r.mean_tau_bar / eps_time + batch.a + 4.0 * se;
  r.pass = r.p_hat <= r.bound;
  return r;
}

inline CoupleOptions coupling_run_options() {
  CoupleOptions opts;
  opts.stop = StopRule::coupling;
  opts.track_levels = false;
  opts.record_z = false;
  return opts;
}

inline TailBound tail_bound_check(const CouplingModel& model, double a, double eps_time,
                                  SimConfig cfg, std::size_t n) {
  cfg.horizon = std::max(cfg.horizon, eps_time);
  return tail_bound_check(simulate_batch(model, a, cfg, n, coupling_run_options()), eps_time);
}

struct LcpCell {
  double a = 0.0;
  double eps_time = 0.0;
  Estimate p_late;  // P(T > eps_time) with a Wilson interval
  bool below = false;  // p_late.mean < eps_time
};

inline LcpCell lcp_cell(const PathBatch& batch, double eps_time) {
  std::size_t late = 0;
  for (const auto& p : batch.paths) {
    late += stopping_times(p, eps_time).coupling_after ? 1 : 0;
  }
  LcpCell c;
  c.a = batch.a;
  c.eps_time = eps_time;
  c.p_late = estimate_proportion(late, batch.paths.size());
  c.below = c.p_late.mean < eps_time;
  return c;
}

// Table of P(T > eps) over a_grid x eps_grid, one batch per a.
inline std::vector<LcpCell> lcp_criterion(const CouplingModel& model, std::span<const double> a_grid,
                                          std::span<const double> eps_grid, SimConfig cfg,
                                          std::size_t n) {
  if (a_grid.empty() || eps_grid.empty()) {
    throw std::invalid_argument("lcp_criterion: grids must be nonempty");
  }
  cfg.horizon = std::max(cfg.horizon, *std::max_element(eps_grid.begin(), eps_grid.end()));
  std::vector<LcpCell> table;
  for (double a : a_grid) {
    const PathBatch b = simulate_batch(model, a, cfg, n, coupling_run_options());
    for (double e : eps_grid) {
      table.push_back(lcp_cell(b, e));
    }
  }
  return table;
}

struct CfRow {
  double xi = 0.0;
  std::complex<double> exact;
  std::complex<double> phi_x;
  std::complex<double> phi_y;  // of Y_t - a; equals phi_x for plain sampler runs
  double dev_x = 0.0;
  double dev_y = 0.0;
};

struct LawReport {
  std::size_t n = 0;
  double t = 0.0;
  double tolerance = 0.0;  // 5 / sqrt(n)
  std::vector<CfRow> cf;
  Estimate z_mean;
  double a = 0.0;
  Estimate flip_mean;
  std::size_t flips = 0;
  std::size_t invariant_failures = 0;
  bool cf_pass = false;
  bool z_pass = false;
  bool flip_pass = false;
  bool pass = false;
};

namespace detail {

inline std::complex<double> empirical_cf(std::span<const double> xs, double xi) {
  CompensatedSum re;
  CompensatedSum im;
  for (double x : xs) {
    re.add(std::cos(xi * x));
    im.add(std::sin(xi * x));
  }
  const double n = static_cast<double>(xs.size());
  return {re.value() / n, im.value() / n};
}

}  // namespace detail

// Law of X_t and Y_t - a against exp(t psi_eps), the martingale property of
// Z, symmetry of the flip jumps and the per-path invariants.
inline LawReport law_checks(const CouplingModel& model, double a, double t,
                            std::span<const double> xi_grid, SimConfig cfg, std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("law_checks: need at least one path");
  }
  cfg.horizon = t;
  CoupleOptions opts;
  opts.record_z = false;
  const PathBatch b = simulate_batch(model, a, cfg, n, opts);

  LawReport r;
  r.n = n;
  r.t = t;
  r.a = a;
  r.tolerance = 5.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(n);
  ys.reserve(n);
  MeanAccumulator z;
  CompensatedSum fsum;
  CompensatedSum fsq;
  for (const auto& p : b.paths) {
    xs.push_back(*p.x_end);
    ys.push_back(*p.y_end - a);
    z.add(p.z_end);
    r.flips += p.n_flips;
    fsum.add(p.flip_sum);
    fsq.add(p.flip_sum_sq);
    r.invariant_failures += p.invariants_ok ? 0 : 1;
  }
  r.cf_pass = true;
  for (double xi : xi_grid) {
    CfRow row;
    row.xi = xi;
    row.exact = std::exp(t * truncated_exponent(model.nu(), xi, cfg.epsilon));
    row.phi_x = detail::empirical_cf(xs, xi);
    row.phi_y = detail::empirical_cf(ys, xi);
    row.dev_x = std::abs(row.phi_x - row.exact);
    row.dev_y = std::abs(row.phi_y - row.exact);
    r.cf_pass = r.cf_pass && row.dev_x <= r.tolerance && row.dev_y <= r.tolerance;
    r.cf.push_back(row);
  }
  r.z_mean = make_mean_estimate(z);
  r.z_pass = std::abs(r.z_mean.mean - a) <= 4.0 * r.z_mean.std_error + 1e-15;
  if (r.flips > 0) {
    const double m = static_cast<double>(r.flips);
    const double mean = fsum.value() / m;
    const double var = std::max(0.0, fsq.value() / m - mean * mean);
    r.flip_mean.n = r.flips;
    r.flip_mean.mean = mean;
    r.flip_mean.std_error = std::sqrt(var / m);
    r.flip_mean.ci_lo = mean - 1.96 * r.flip_mean.std_error;
    r.flip_mean.ci_hi = mean + 1.96 * r.flip_mean.std_error;
    r.flip_pass = std::abs(mean) <= 4.0 * r.flip_mean.std_error;
  } else {
    r.flip_pass = true;
  }
  r.pass = r.cf_pass && r.z_pass && r.flip_pass && r.invariant_failures == 0;
  return r;
}

// Law checks for the uncoupled sampler: characteristic function of X_t, its
// mean against the big-jump drift, and the event rate.
struct SamplerReport {
  std::size_t n = 0;
  double t = 0.0;
  double tolerance = 0.0;
  std::vector<CfRow> cf;
  Estimate mean;
  double expected_mean = 0.0;
  double event_rate = 0.0;
  double expected_rate = 0.0;
  double rate_tolerance = 0.0;
  bool cf_pass = false;
  bool mean_pass = false;
  bool rate_pass = false;
  bool pass = false;
};

inline SamplerReport sampler_law_check(const LevyMeasure& nu, std::span<const double> xi_grid,
                                       const SimConfig& cfg, std::size_t n) {
  cfg.validate();
  if (n == 0) {
    throw std::invalid_argument("sampler_law_check: need at least one path");
  }
  const Streams streams = build_streams(nu, symmetric_part(nu), cfg.epsilon);
  struct Draw {
    double x = 0.0;
    std::size_t events = 0;
  };
  const auto draws = run_indexed(n, cfg.workers, [&](std::size_t i) {
    EventSource src(streams, cfg.master_seed, static_cast<std::uint64_t>(i));
    CompensatedSum acc;
    Draw d;
    while (auto e = src.next(cfg.horizon)) {
      acc.add(e->u);
      ++d.events;
    }
    d.x = streams.drift * cfg.horizon + acc.value();
    return d;
  });
  SamplerReport r;
  r.n = n;
  r.t = cfg.horizon;
  r.tolerance = 5.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> xs;
  xs.reserve(n);
  MeanAccumulator m;
  CompensatedSum events;
  for (const auto& d : draws) {
    xs.push_back(d.x);
    m.add(d.x);
    events.add(static_cast<double>(d.events));
  }
  r.cf_pass = true;
  for (double xi : xi_grid) {
    CfRow row;
    row.xi = xi;
    row.exact = std::exp(cfg.horizon * truncated_exponent(nu, xi, cfg.epsilon));
    row.phi_x = detail::empirical_cf(xs, xi);
    row.phi_y = row.phi_x;
    row.dev_x = std::abs(row.phi_x - row.exact);
    row.dev_y = row.dev_x;
    r.cf_pass = r.cf_pass && row.dev_x <= r.tolerance;
    r.cf.push_back(row);
  }
  r.mean = make_mean_estimate(m);
  r.expected_mean = cfg.horizon * streams.big_jump_mean;
  r.mean_pass = std::abs(r.mean.mean - r.expected_mean) <= 4.0 * r.mean.std_error + 1e-12;
  const double nt = static_cast<double>(n) * cfg.horizon;
  r.expected_rate = streams.a.rate + streams.b.rate;
  r.event_rate = events.value() / nt;
  r.rate_tolerance = 4.0 * std::sqrt(r.expected_rate / nt);
  r.rate_pass = std::abs(r.event_rate - r.expected_rate) <= r.rate_tolerance;
  r.pass = r.cf_pass && r.mean_pass && r.rate_pass;
  return r;
}

// Mean of the compensated squared-jump functional over n paths run to the
// horizon (stopped at tau_bar); Z samples are kept only inside each task.
inline Estimate compensator_residual(const CouplingModel& model, double a, const SimConfig& cfg,
                                     std::size_t n) {
  cfg.validate();
  if (n == 0) {
    throw std::invalid_argument("compensator_residual: empty path set");
  }
  CoupleOptions opts;
  opts.stop = StopRule::tau_bar;
  opts.track_levels = false;
  opts.record_z = true;
  const auto values = run_indexed(n, cfg.workers, [&](std::size_t i) {
    return compensator_martingale(
        simulate_coupled(model, a, cfg, static_cast<std::uint64_t>(i), opts), model.profile());
  });
  return estimate_mean(values);
}

// Coupled draws of (X_t, Y_t) and the coupling inequality
// tv_emp(X_t, Y_t)/2 <= P(T > t) + slack + 4 se.
struct CouplingTvCheck {
  double a = 0.0;
  double t = 0.0;
  double bin_width = 0.0;
  double half_tv = 0.0;
  Estimate p_late;
  double slack = 0.0;
  bool pass = false;
};

inline CouplingTvCheck coupling_tv_bound(const CouplingModel& model, double a, SimConfig cfg,
                                         std::size_t n, double bin_width = 0.01,
                                         double slack = 0.02) {
  CoupleOptions opts;
  opts.record_z = false;
  const PathBatch b = simulate_batch(model, a, cfg, n, opts);
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t late = 0;
  for (const auto& p : b.paths) {
    xs.push_back(*p.x_end);
    ys.push_back(*p.y_end);
    late += p.coupling.outcome == CouplingOutcome::coupled ? 0 : 1;
  }
  CouplingTvCheck c;
  c.a = a;
  c.t = cfg.horizon;
  c.bin_width = bin_width;
  c.half_tv = 0.5 * tv_empirical(xs, ys, bin_width);
  c.p_late = estimate_proportion(late, n);
  c.slack = slack;
  c.pass = c.half_tv <= c.p_late.mean + slack + 4.0 * c.p_late.std_error;
  return c;
}

}  // namespace lcpkit
