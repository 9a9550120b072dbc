#pragma once

// Event-driven simulation of the truncated pure-jump Levy process as two
// independent compound-Poisson streams: A carries nu - rho/2 plus the big
// jumps, B carries rho/2. Jumps with |x| < epsilon are dropped and the
// compensator drift of the kept small jumps is added analytically.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lcpkit/measure.hpp"
#include "lcpkit/rng.hpp"

namespace lcpkit {

struct SimConfig {
  double epsilon = 1e-3;
  double horizon = 1.0;
  std::uint64_t master_seed = 42;
  double delta_couple = 4e-3;
  unsigned workers = 1;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
      throw std::invalid_argument("epsilon must lie in (0,1)");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw std::invalid_argument("horizon must be positive and finite");
    }
    if (!(delta_couple > 0.0 && delta_couple < 1.0)) {
      throw std::invalid_argument("delta_couple must lie in (0,1)");
    }
    if (epsilon > delta_couple / 4.0) {
      throw std::invalid_argument("epsilon must not exceed delta_couple / 4");
    }
  }
};

// Vose alias table over a finite list of weights.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    if (n == 0) {
      return;
    }
    double total = 0.0;
    for (double w : weights) {
      total += w;
    }
    prob_.assign(n, 1.0);
    alias_.resize(n);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small;
    std::vector<std::size_t> large;
    for (std::size_t i = 0; i < n; ++i) {
      alias_[i] = i;
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
  }

  std::size_t size() const { return prob_.size(); }

  // One uniform in (0,1) picks both the column and the coin.
  std::size_t pick(double u) const {
    const double scaled = u * static_cast<double>(prob_.size());
    const auto col = std::min(static_cast<std::size_t>(scaled), prob_.size() - 1);
    const double coin = scaled - static_cast<double>(col);
    return coin < prob_[col] ? col : alias_[col];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

struct JumpDraw {
  double u = 0.0;
  bool atom = false;
};

// Exact sampler for the normalized restriction of a measure to eps <= |x| <= 1,
// optionally together with its big jumps.
class JumpSizeSampler {
 public:
  JumpSizeSampler() = default;

  JumpSizeSampler(const LevyMeasure& m, double eps, bool include_big)
      : JumpSizeSampler(m, eps, {1.0, 1.0}, sampler_atoms(m, eps, include_big)) {}

  // Density pieces of m on each side scaled by side_scale[plus, minus],
  // together with an explicit list of atoms.
  JumpSizeSampler(const LevyMeasure& m, double eps, std::array<double, 2> side_scale,
                  const std::vector<Atom>& atoms) {
    for (Side s : {Side::plus, Side::minus}) {
      const double scale = side_scale[s == Side::plus ? 0 : 1];
      if (!(scale > 0.0)) {
        continue;
      }
      for (const auto& seg : m.segments(s)) {
        const double mass = scale * seg.moment(0, eps, 1.0);
        if (mass > 0.0) {
          pieces_.push_back(Piece::make(seg, eps, sign_of(s)));
          density_mass_ += mass;
          piece_cum_.push_back(density_mass_);
          min_abs_ = std::min(min_abs_, std::max(seg.lo, eps));
        }
      }
    }
    std::vector<double> weights;
    for (const auto& a : atoms) {
      if (a.mass > 0.0) {
        atom_x_.push_back(a.x);
        weights.push_back(a.mass);
        atom_mass_ += a.mass;
        min_abs_ = std::min(min_abs_, std::abs(a.x));
      }
    }
    atoms_ = AliasTable(weights);
  }

  static std::vector<Atom> sampler_atoms(const LevyMeasure& m, double eps, bool include_big) {
    std::vector<Atom> out;
    for (const auto& a : m.small_atoms()) {
      if (std::abs(a.x) >= eps) {
        out.push_back(a);
      }
    }
    if (include_big) {
      for (const auto& a : m.big_jumps()) {
        out.push_back(a);
      }
    }
    return out;
  }

  double total_mass() const { return density_mass_ + atom_mass_; }
  bool empty() const { return total_mass() <= 0.0; }

  // Smallest |u| in the support; +inf for an empty sampler.
  double min_abs_support() const { return min_abs_; }

  template <typename Rng>
  JumpDraw draw(Rng& rng) const {
    const double v = rng.uniform() * total_mass();
    if (v < density_mass_ || atom_x_.empty()) {
      auto it = std::upper_bound(piece_cum_.begin(), piece_cum_.end(), v);
      if (it == piece_cum_.end()) {
        --it;
      }
      const auto& piece = pieces_[static_cast<std::size_t>(std::distance(piece_cum_.begin(), it))];
      return {piece.sign * piece.sample(rng.uniform()), false};
    }
    return {atom_x_[atoms_.pick(rng.uniform())], true};
  }

 private:
  // A power segment clipped to [eps, 1] with its inverse-CDF constants
  // precomputed: x = l exp(log1p(v * span) / p).
  struct Piece {
    double lo = 0.0;
    double hi = 0.0;
    double p = 0.0;
    double span = 0.0;
    double log_ratio = 0.0;
    double sign = 1.0;

    static Piece make(const PowerSegment& seg, double eps, double sign) {
      Piece pc;
      pc.lo = std::max(seg.lo, eps);
      pc.hi = std::min(seg.hi, 1.0);
      pc.p = seg.exponent + 1.0;
      pc.log_ratio = std::log1p((pc.hi - pc.lo) / pc.lo);
      pc.span = std::expm1(pc.p * pc.log_ratio);
      pc.sign = sign;
      return pc;
    }

    double sample(double v) const {
      if (std::abs(p) < 1e-12) {
        return lo * std::exp(v * log_ratio);
      }
      return std::clamp(lo * std::exp(std::log1p(v * span) / p), lo, hi);
    }
  };

  std::vector<Piece> pieces_;
  std::vector<double> piece_cum_;
  double density_mass_ = 0.0;
  double atom_mass_ = 0.0;
  std::vector<double> atom_x_;
  AliasTable atoms_;
  double min_abs_ = std::numeric_limits<double>::infinity();
};

enum class StreamLabel : std::uint8_t { A, B };

inline char to_char(StreamLabel s) { return s == StreamLabel::A ? 'A' : 'B'; }

struct StreamSpec {
  StreamLabel label = StreamLabel::A;
  double rate = 0.0;
  JumpSizeSampler proposal;
  // Stream A only, when rho/nu varies inside a density piece: density
  // proposals from nu are kept with probability 1 - rho/(2 nu), which leaves
  // exactly nu - rho/2. Atoms already carry their exact masses.
  std::shared_ptr<const LevyMeasure> nu;
  std::shared_ptr<const LevyMeasure> rho;
};

template <typename Rng>
double sample_jump(const StreamSpec& stream, Rng& rng) {
  if (!(stream.rate > 0.0)) {
    throw std::logic_error("sample_jump: stream has zero rate");
  }
  for (;;) {
    const JumpDraw d = stream.proposal.draw(rng);
    if (!stream.rho || d.atom) {
      return d.u;
    }
    const double ratio = stream.rho->density(d.u) / stream.nu->density(d.u);
    if (ratio <= 0.0 || rng.uniform() >= 0.5 * ratio) {
      return d.u;
    }
  }
}

struct Streams {
  StreamSpec a;
  StreamSpec b;
  // b_eps = -integral of x nu(dx) over eps <= |x| <= 1.
  double drift = 0.0;
  double epsilon = 0.0;
  // Mean of the big-jump part per unit time.
  double big_jump_mean = 0.0;
};

inline Streams build_streams(const LevyMeasure& nu, const LevyMeasure& rho, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("build_streams: epsilon must lie in (0,1)");
  }
  Streams s;
  s.epsilon = eps;

  s.b.label = StreamLabel::B;
  s.b.proposal = JumpSizeSampler(rho, eps, false);
  s.b.rate = 0.5 * s.b.proposal.total_mass();

  s.a.label = StreamLabel::A;
  std::vector<Atom> a_atoms;
  for (const auto& at : JumpSizeSampler::sampler_atoms(nu, eps, true)) {
    const double m = std::abs(at.x) <= 1.0 ? at.mass - 0.5 * rho.atom_mass(at.x) : at.mass;
    if (m > 0.0) {
      a_atoms.push_back({at.x, m});
    }
  }
  // When rho/nu is constant on each side of the density part, nu - rho/2 is
  // nu rescaled per side and can be sampled directly.
  const auto pn = detail::single_power_law(nu);
  const auto pr = detail::single_power_law(rho);
  if (!rho.has_density() || (pn && pr && pr->alpha == pn->alpha)) {
    std::array<double, 2> scale{1.0, 1.0};
    if (pn && pr) {
      scale[0] = pn->c_plus > 0.0 ? 1.0 - 0.5 * pr->c_plus / pn->c_plus : 0.0;
      scale[1] = pn->c_minus > 0.0 ? 1.0 - 0.5 * pr->c_minus / pn->c_minus : 0.0;
    }
    s.a.proposal = JumpSizeSampler(nu, eps, scale, a_atoms);
    s.a.rate = s.a.proposal.total_mass();
  } else {
    s.a.proposal = JumpSizeSampler(nu, eps, {1.0, 1.0}, a_atoms);
    s.a.nu = std::make_shared<const LevyMeasure>(nu);
    s.a.rho = std::make_shared<const LevyMeasure>(rho);
    double rho_density = 0.0;
    for (Side side : {Side::plus, Side::minus}) {
      for (const auto& seg : rho.segments(side)) {
        rho_density += seg.moment(0, eps, 1.0);
      }
    }
    s.a.rate = std::max(0.0, s.a.proposal.total_mass() - 0.5 * rho_density);
  }

  s.drift = -(nu.side_moment(Side::plus, 1, eps, 1.0) - nu.side_moment(Side::minus, 1, eps, 1.0));
  for (const auto& a : nu.big_jumps()) {
    s.big_jump_mean += a.x * a.mass;
  }
  return s;
}

struct Event {
  double time = 0.0;
  double u = 0.0;
  StreamLabel stream = StreamLabel::A;
};

struct EventLog {
  std::vector<Event> events;
  double horizon = 0.0;
  double drift = 0.0;

  // X_t = b_eps t + sum of jumps up to t.
  double level_at(double t) const {
    CompensatedSum acc;
    acc.add(drift * t);
    for (const auto& e : events) {
      if (e.time > t) {
        break;
      }
      acc.add(e.u);
    }
    return acc.value();
  }
};

// Merges the two streams of one path in time order. Each stream draws from its
// own counter-based generator, so the B events of a path do not depend on
// whether stream A is simulated.
class EventSource {
 public:
  static constexpr std::uint64_t kStreamA = 1;
  static constexpr std::uint64_t kStreamB = 2;

  EventSource(const Streams& streams, std::uint64_t master_seed, std::uint64_t path_index,
              bool with_a = true)
      : streams_(&streams),
        rng_a_(master_seed, path_index, kStreamA),
        rng_b_(master_seed, path_index, kStreamB),
        with_a_(with_a && streams.a.rate > 0.0) {
    next_a_ = with_a_ ? rng_a_.exponential(streams.a.rate) : kNever;
    next_b_ = streams.b.rate > 0.0 ? rng_b_.exponential(streams.b.rate) : kNever;
  }

  // Next event with time <= horizon, if any.
  std::optional<Event> next(double horizon) {
    if (next_a_ <= next_b_) {
      if (next_a_ > horizon) {
        return std::nullopt;
      }
      Event e{next_a_, sample_jump(streams_->a, rng_a_), StreamLabel::A};
      next_a_ += rng_a_.exponential(streams_->a.rate);
      return e;
    }
    if (next_b_ > horizon) {
      return std::nullopt;
    }
    Event e{next_b_, sample_jump(streams_->b, rng_b_), StreamLabel::B};
    next_b_ += rng_b_.exponential(streams_->b.rate);
    return e;
  }

 private:
  static constexpr double kNever = std::numeric_limits<double>::infinity();

  const Streams* streams_;
  CounterRng rng_a_;
  CounterRng rng_b_;
  bool with_a_;
  double next_a_ = kNever;
  double next_b_ = kNever;
};

inline EventLog sample_path(const Streams& streams, const SimConfig& cfg, std::uint64_t path_index) {
  EventLog log;
  log.horizon = cfg.horizon;
  log.drift = streams.drift;
  EventSource src(streams, cfg.master_seed, path_index);
  while (auto e = src.next(cfg.horizon)) {
    log.events.push_back(*e);
  }
  return log;
}

inline EventLog sample_path(const LevyMeasure& nu, const SimConfig& cfg, std::uint64_t path_index) {
  const Streams streams = build_streams(nu, symmetric_part(nu), cfg.epsilon);
  return sample_path(streams, cfg, path_index);
}

}  // namespace lcpkit
