#pragma once

// Mirror coupling of two copies of the same pure-jump Levy process started
// at 0 and at a > 0. Both copies share every jump; a stream-B jump u is
// reversed in Y whenever |u| <= Z/2, where Z = Y - X is the current gap.
// Z therefore moves only at flipped B-events, by -2u.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lcpkit/measure.hpp"
#include "lcpkit/sampler.hpp"
#include "lcpkit/stats.hpp"

namespace lcpkit {

// The measure, its rho-profile and the truncated streams for one epsilon.
class CouplingModel {
 public:
  CouplingModel(LevyMeasure nu, double epsilon)
      : nu_(std::move(nu)),
        profile_(nu_),
        streams_(build_streams(nu_, profile_.rho(), epsilon)) {}

  const LevyMeasure& nu() const { return nu_; }
  const RhoProfile& profile() const { return profile_; }
  const Streams& streams() const { return streams_; }
  double epsilon() const { return streams_.epsilon; }

 private:
  LevyMeasure nu_;
  RhoProfile profile_;
  Streams streams_;
};

enum class ExitClass { coupled0, exceeded_one, stalled, censored };
enum class CouplingOutcome { coupled, censored, stalled };

inline const char* to_string(ExitClass c) {
  switch (c) {
    case ExitClass::coupled0:
      return "Coupled0";
    case ExitClass::exceeded_one:
      return "ExceededOne";
    case ExitClass::stalled:
      return "Stalled";
    default:
      return "Censored";
  }
}

enum class StopRule {
  horizon,   // run to the horizon
  tau_bar,   // stop once Z leaves (0,1) or can no longer move
  coupling,  // stop once the paths merge or Z can no longer move
};

struct CoupleOptions {
  StopRule stop = StopRule::horizon;
  // Simulate stream A and report X and Y. Z never depends on stream A.
  bool track_levels = true;
  bool record_z = true;
  bool record_trace = false;
};

struct ZSample {
  double time = 0.0;
  double z = 0.0;
  // Set on the synthetic drop to 0 when the gap falls below delta.
  bool merge = false;
};

struct CouplingTime {
  CouplingOutcome outcome = CouplingOutcome::censored;
  // Coupling time T, the stall time, or the end of simulation when censored.
  double time = 0.0;
};

struct CoupledPath {
  double a = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double horizon = 0.0;
  double end_time = 0.0;

  std::vector<ZSample> z_samples;

  // Filled when CoupleOptions::record_trace is set.
  EventLog events;
  std::vector<std::size_t> flips;
  std::vector<double> z_after;

  CouplingTime coupling;
  // True when T was declared by the delta threshold rather than an exact 0.
  bool declared = false;
  std::optional<double> tau_bar;
  double z_at_tau_bar = 0.0;
  ExitClass exit_class = ExitClass::censored;
  std::optional<double> first_b_time;
  bool coupled_at_first_b = false;

  double z_end = 0.0;
  // Gap removed by the merge at T; zero unless declared.
  double merge_gap = 0.0;
  std::optional<double> x_end;
  std::optional<double> y_end;

  std::size_t n_flips = 0;
  double flip_sum = 0.0;
  double flip_sum_sq = 0.0;
  // Online check of Z >= 0, |dZ| <= Z-, flips only for |u| <= Z-/2 and
  // Z at tau_bar <= 2.
  bool invariants_ok = true;

  // Gap at min(t, tau_bar) for t the end of simulation.
  double z_at_stop() const { return tau_bar ? z_at_tau_bar : z_end; }
  double tau_bar_or_end() const { return tau_bar ? *tau_bar : end_time; }
};

inline CoupledPath simulate_coupled(const CouplingModel& model, double a, const SimConfig& cfg,
                                    std::uint64_t path_index, const CoupleOptions& opts = {}) {
  cfg.validate();
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("simulate_coupled: starting gap a must be positive");
  }
  if (cfg.epsilon != model.epsilon()) {
    throw std::invalid_argument("simulate_coupled: config epsilon differs from the model's");
  }
  const Streams& streams = model.streams();
  const double delta = cfg.delta_couple;
  const double u_min = streams.b.proposal.min_abs_support();
  const bool b_active = streams.b.rate > 0.0;

  CoupledPath p;
  p.a = a;
  p.epsilon = cfg.epsilon;
  p.delta = delta;
  p.horizon = cfg.horizon;
  p.events.horizon = cfg.horizon;
  p.events.drift = streams.drift;

  double z = a;
  bool coupled = false;
  bool stalled = false;
  double z_before_merge = a;

  auto push_z = [&](double t, double value, bool merge) {
    if (opts.record_z) {
      p.z_samples.push_back({t, value, merge});
    }
  };
  auto update_exit = [&](double t) {
    if (p.tau_bar) {
      return;
    }
    if (coupled) {
      p.tau_bar = t;
      p.z_at_tau_bar = z_before_merge;
      p.exit_class = ExitClass::coupled0;
    } else if (z >= 1.0) {
      p.tau_bar = t;
      p.z_at_tau_bar = z;
      p.exit_class = ExitClass::exceeded_one;
      p.invariants_ok = p.invariants_ok && z <= 2.0;
    }
  };
  auto check_merge = [&](double t) {
    if (z <= delta) {
      coupled = true;
      p.declared = z != 0.0;
      z_before_merge = z;
      p.merge_gap = z;
      p.coupling = {CouplingOutcome::coupled, t};
      z = 0.0;
      push_z(t, 0.0, true);
    }
  };
  auto check_stall = [&](double t) {
    if (!coupled && b_active && z < 2.0 * u_min) {
      stalled = true;
      p.coupling = {CouplingOutcome::stalled, t};
      if (!p.tau_bar) {
        p.exit_class = ExitClass::stalled;
      }
    }
  };
  auto should_stop = [&]() {
    switch (opts.stop) {
      case StopRule::tau_bar:
        return p.tau_bar.has_value() || stalled;
      case StopRule::coupling:
        return coupled || stalled;
      default:
        return !opts.track_levels && (coupled || stalled);
    }
  };

  push_z(0.0, a, false);
  check_merge(0.0);
  update_exit(0.0);
  check_stall(0.0);

  CompensatedSum x_jumps;
  EventSource src(streams, cfg.master_seed, path_index, opts.track_levels);
  double t = 0.0;
  bool stopped_early = false;
  while (true) {
    if (should_stop()) {
      stopped_early = true;
      break;
    }
    const auto ev = src.next(cfg.horizon);
    if (!ev) {
      break;
    }
    t = ev->time;
    const double u = ev->u;
    bool flipped = false;
    if (ev->stream == StreamLabel::B) {
      if (!p.first_b_time) {
        p.first_b_time = t;
      }
      if (!coupled && !stalled && z > 0.0 && std::abs(u) <= 0.5 * z) {
        flipped = true;
        const double dz = -2.0 * u;
        const double z_prev = z;
        z += dz;
        p.invariants_ok = p.invariants_ok && std::abs(dz) <= z_prev && z >= 0.0;
        ++p.n_flips;
        p.flip_sum += dz;
        p.flip_sum_sq += dz * dz;
        push_z(t, z, false);
        check_merge(t);
        if (coupled && *p.first_b_time == t) {
          p.coupled_at_first_b = true;
        }
        update_exit(t);
        check_stall(t);
      }
    }
    x_jumps.add(u);
    if (opts.record_trace) {
      if (flipped) {
        p.flips.push_back(p.events.events.size());
      }
      p.events.events.push_back(*ev);
      p.z_after.push_back(z);
    }
  }

  // A stalled gap is frozen, so it is known up to the horizon; so is every
  // early exit under the horizon rule.
  p.end_time =
      (stopped_early && !stalled && opts.stop != StopRule::horizon) ? t : cfg.horizon;
  if (!coupled && !stalled) {
    p.coupling = {CouplingOutcome::censored, p.end_time};
  }
  if (!p.tau_bar && !stalled) {
    p.exit_class = ExitClass::censored;
  }
  p.z_end = z;
  if (opts.track_levels) {
    const double drift = streams.drift * p.end_time;
    p.x_end = drift + x_jumps.value();
    // Y = X + Z, so merged paths end bit-identical.
    p.y_end = *p.x_end + z;
  }
  return p;
}

inline CoupledPath simulate_coupled(const LevyMeasure& nu, double a, const SimConfig& cfg,
                                    std::uint64_t path_index, const CoupleOptions& opts = {}) {
  return simulate_coupled(CouplingModel(nu, cfg.epsilon), a, cfg, path_index, opts);
}

struct StoppingTimes {
  bool coupling_after = true;  // T > eps_time
  std::optional<double> tau_bar;
  ExitClass exit_class = ExitClass::censored;
};

inline StoppingTimes stopping_times(const CoupledPath& path, double eps_time) {
  const bool coupled_in_time =
      path.coupling.outcome == CouplingOutcome::coupled && path.coupling.time <= eps_time;
  if (!coupled_in_time && path.coupling.outcome == CouplingOutcome::censored &&
      path.end_time < eps_time) {
    throw std::invalid_argument("stopping_times: path was not simulated up to eps_time");
  }
  return {!coupled_in_time, path.tau_bar, path.exit_class};
}

// Per-path M = sum over s <= t ^ tau_bar of (dZ)^2 [dZ < 0] minus the
// integral of 2 eta_eps(Z/2), where eta_eps drops the truncated jumps:
// eta_eps(r) = eta(r) - eta(eps-) for r >= eps, else 0.
inline double compensator_martingale(const CoupledPath& path, const RhoProfile& profile) {
  if (path.z_samples.empty()) {
    throw std::invalid_argument("compensator_residual: path has no recorded Z samples");
  }
  const double stop = path.tau_bar_or_end();
  const double eta_cut = profile.eta_below(path.epsilon);
  auto eta_eps = [&](double r) { return r >= path.epsilon ? profile.eta(r) - eta_cut : 0.0; };
  CompensatedSum jumps;
  CompensatedSum comp;
  const auto& zs = path.z_samples;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    if (zs[k].time > stop) {
      break;
    }
    if (k > 0 && !zs[k].merge) {
      const double dz = zs[k].z - zs[k - 1].z;
      if (dz < 0.0) {
        jumps.add(dz * dz);
      }
    }
    const double next = (k + 1 < zs.size()) ? std::min(zs[k + 1].time, stop) : stop;
    if (next > zs[k].time) {
      comp.add(2.0 * eta_eps(0.5 * zs[k].z) * (next - zs[k].time));
    }
  }
  return jumps.value() - comp.value();
}

inline Estimate compensator_residual(const std::vector<CoupledPath>& paths,
                                     const RhoProfile& profile) {
  if (paths.empty()) {
    throw std::invalid_argument("compensator_residual: empty path set");
  }
  MeanAccumulator acc;
  for (const auto& p : paths) {
    acc.add(compensator_martingale(p, profile));
  }
  return make_mean_estimate(acc);
}

}  // namespace lcpkit
