#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcpkit/sampler.hpp"

using namespace lcpkit;
using Catch::Approx;

namespace {

LevyMeasure power(double alpha, double cp, double cm) { return LevyMeasure({PowerLaw{alpha, cp, cm}}); }

Streams streams_for(const LevyMeasure& nu, double eps) { return build_streams(nu, symmetric_part(nu), eps); }

// Dense log-spaced breakpoints so a piecewise tabulated integrand is
// integrated cell by cell.
std::vector<double> log_breaks(double lo, double hi) {
  const double a = std::min(std::abs(lo), std::abs(hi));
  const double b = std::max(std::abs(lo), std::abs(hi));
  const double s = lo < 0.0 ? -1.0 : 1.0;
  std::vector<double> out;
  for (int k = 1; k < 4000; ++k) {
    out.push_back(s * a * std::pow(b / a, k / 4000.0));
  }
  return out;
}

}  // namespace

TEST_CASE("stream rates for the symmetric power law") {
  const auto s = streams_for(power(1.2, 1, 1), 1e-3);
  const double rate = (std::pow(1e-3, -1.2) - 1.0) / 1.2;
  REQUIRE(rate == Approx(3316.7264212791447).epsilon(1e-14));
  REQUIRE(s.b.rate == Approx(rate).epsilon(1e-12));
  REQUIRE(s.a.rate == Approx(rate).epsilon(1e-12));
  REQUIRE(s.drift == 0.0);
  REQUIRE(s.big_jump_mean == 0.0);
}

TEST_CASE("one-sided measure has an empty B stream") {
  const auto s = streams_for(power(1.2, 1, 0), 1e-3);
  REQUIRE(s.b.rate == 0.0);
  REQUIRE(s.a.rate == Approx(3316.7264212791447).epsilon(1e-12));
  // drift = -int_eps^1 x^{-1.2} dx
  REQUIRE(s.drift == Approx(-(std::pow(1e-3, -0.2) - 1.0) / 0.2).epsilon(1e-12));
}

TEST_CASE("atoms are drawn with their masses") {
  const LevyMeasure nu({Atoms{{{0.25, 1.0}, {-0.25, 1.0}}}});
  const auto s = streams_for(nu, 1e-3);
  REQUIRE(s.a.rate == Approx(1.0));
  REQUIRE(s.b.rate == Approx(1.0));
  CounterRng rng(7);
  int plus = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = sample_jump(s.b, rng);
    REQUIRE(std::abs(u) == 0.25);
    plus += u > 0;
  }
  REQUIRE(std::abs(plus / double(n) - 0.5) <= 4.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("power-law jump sizes follow the truncated law") {
  const double alpha = 1.2;
  const double eps = 0.1;
  const JumpSizeSampler js(power(alpha, 1, 0), eps, false);
  const double ne = std::pow(eps, -alpha) - 1.0;
  const double p_tail = (std::pow(0.5, -alpha) - 1.0) / ne;
  REQUIRE(p_tail == Approx(0.08737306606165522).epsilon(1e-14));
  REQUIRE(js.min_abs_support() == eps);

  const std::size_t n = 1000000;
  std::vector<double> u(n);
  CounterRng rng(2024, 0, 9);
  std::size_t tail = 0;
  for (auto& x : u) {
    x = js.draw(rng).u;
    REQUIRE(x >= eps);
    REQUIRE(x <= 1.0);
    tail += x > 0.5;
  }
  const double se = std::sqrt(p_tail * (1 - p_tail) / n);
  REQUIRE(std::abs(tail / double(n) - p_tail) <= 4.0 * se);

  std::sort(u.begin(), u.end());
  auto cdf = [&](double x) { return (std::pow(eps, -alpha) - std::pow(x, -alpha)) / ne; };
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(u[i]);
    ks = std::max({ks, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  REQUIRE(ks <= 0.002);
}

TEST_CASE("thinned A stream matches nu - rho/2 when rho/nu varies") {
  // Two exponents make rho/nu nonconstant, forcing the rejection path.
  const LevyMeasure nu({PowerLaw{1.5, 1, 1}, PowerLaw{0.5, 1, 0}});
  const LevyMeasure rho = symmetric_part(nu);
  const double eps = 0.01;
  const auto s = build_streams(nu, rho, eps);
  REQUIRE(s.a.rho != nullptr);

  auto a_density = [&](double x) { return nu.density(x) - 0.5 * rho.density(x); };
  const std::vector<double> edges{-1.0, -0.3, -0.05, -eps, eps, 0.05, 0.3, 1.0};
  std::vector<double> expect;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double lo = edges[k];
    const double hi = edges[k + 1];
    double m = 0.0;
    if (!(lo < 0.0 && hi > 0.0)) {
      m = integrate_pieces(a_density, lo, hi, log_breaks(lo, hi), 0.0, 1e-12).value;
    }
    expect.push_back(m);
    total += m;
  }
  REQUIRE(s.a.rate == Approx(total).epsilon(1e-6));

  const int n = 400000;
  std::vector<int> hits(expect.size(), 0);
  CounterRng rng(99);
  for (int i = 0; i < n; ++i) {
    const double u = sample_jump(s.a, rng);
    const auto k = std::upper_bound(edges.begin(), edges.end(), u) - edges.begin() - 1;
    ++hits[static_cast<std::size_t>(std::clamp<long>(k, 0, long(expect.size()) - 1))];
  }
  for (std::size_t k = 0; k < expect.size(); ++k) {
    const double p = expect[k] / total;
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    REQUIRE(std::abs(hits[k] / double(n) - p) <= 4.0 * se + 1e-12);
  }
}

TEST_CASE("paths") {
  SimConfig cfg;
  const auto nu = power(1.2, 1, 1);

  SECTION("zero measure stays at zero") {
    const auto log = sample_path(LevyMeasure{}, cfg, 0);
    REQUIRE(log.events.empty());
    REQUIRE(log.level_at(cfg.horizon) == 0.0);
  }
  SECTION("events are ordered, above epsilon and reproducible") {
    const auto streams = streams_for(nu, cfg.epsilon);
    const auto p1 = sample_path(streams, cfg, 17);
    const auto p2 = sample_path(streams, cfg, 17);
    const auto p3 = sample_path(streams, cfg, 18);
    REQUIRE(p1.events.size() == p2.events.size());
    for (std::size_t i = 0; i < p1.events.size(); ++i) {
      REQUIRE(p1.events[i].time == p2.events[i].time);
      REQUIRE(p1.events[i].u == p2.events[i].u);
      REQUIRE(std::abs(p1.events[i].u) >= cfg.epsilon);
      REQUIRE(std::abs(p1.events[i].u) <= 1.0);
      REQUIRE(p1.events[i].time <= cfg.horizon);
      if (i > 0) {
        REQUIRE(p1.events[i].time > p1.events[i - 1].time);
      }
    }
    REQUIRE(p1.level_at(1.0) != p3.level_at(1.0));
  }
  SECTION("B events do not depend on whether A is simulated") {
    const auto streams = streams_for(nu, cfg.epsilon);
    EventSource both(streams, cfg.master_seed, 5, true);
    EventSource only_b(streams, cfg.master_seed, 5, false);
    std::vector<double> b1;
    std::vector<double> b2;
    while (auto e = both.next(0.2)) {
      if (e->stream == StreamLabel::B) {
        b1.push_back(e->u);
      }
    }
    while (auto e = only_b.next(0.2)) {
      b2.push_back(e->u);
    }
    REQUIRE(b1 == b2);
  }
  SECTION("atom event count has mean 2 per unit time") {
    const LevyMeasure atoms({Atoms{{{0.25, 1.0}, {-0.25, 1.0}}}});
    const auto streams = streams_for(atoms, cfg.epsilon);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += static_cast<double>(sample_path(streams, cfg, i).events.size());
    }
    REQUIRE(std::abs(sum / n - 2.0) <= 0.02);
  }
}

TEST_CASE("invalid settings are rejected") {
  SimConfig cfg;
  cfg.epsilon = 2e-3;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.epsilon = 1e-3;
  cfg.horizon = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  REQUIRE_THROWS_AS(build_streams(LevyMeasure{}, LevyMeasure{}, 1.0), std::invalid_argument);
  StreamSpec empty;
  CounterRng rng(1);
  REQUIRE_THROWS_AS(sample_jump(empty, rng), std::logic_error);
}
