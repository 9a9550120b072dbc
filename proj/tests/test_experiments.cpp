#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "lcpkit/experiments.hpp"

using namespace lcpkit;
using Catch::Approx;

namespace {

LevyMeasure power(double alpha, double cp, double cm) { return LevyMeasure({PowerLaw{alpha, cp, cm}}); }

LevyMeasure quarter_atoms() { return LevyMeasure({Atoms{{{0.25, 1.0}, {-0.25, 1.0}}}}); }

// Survival of the atom chain started at a = 0.5: Z moves by +-0.5 at each
// rate-1 B event and is absorbed at 0. Propagate the walk distribution
// step by step and mix over the Poisson number of events.
double atom_chain_survival(double t) {
  std::map<int, double> dist{{1, 1.0}};  // Z in units of 0.5
  double total = 0.0;
  double poisson = std::exp(-t);
  for (int k = 0; k < 200; ++k) {
    double alive = 0.0;
    for (const auto& [z, p] : dist) {
      alive += p;
    }
    total += poisson * alive;
    std::map<int, double> next;
    for (const auto& [z, p] : dist) {
      if (z - 1 > 0) {
        next[z - 1] += 0.5 * p;
      }
      next[z + 1] += 0.5 * p;
    }
    dist = std::move(next);
    poisson *= t / (k + 1);
  }
  return total;
}

}  // namespace

TEST_CASE("run_indexed keeps index order for any worker count") {
  auto f = [](std::size_t i) { return static_cast<double>(i * i); };
  const auto one = run_indexed(1000, 1, f);
  const auto many = run_indexed(1000, 7, f);
  REQUIRE(one == many);
  REQUIRE(one[31] == 961.0);
  REQUIRE(run_indexed(0, 4, f).empty());
  REQUIRE_THROWS_AS(run_indexed(100, 3,
                                [](std::size_t i) -> int {
                                  if (i == 50) {
                                    throw std::runtime_error("boom");
                                  }
                                  return 0;
                                }),
                    std::runtime_error);
}

TEST_CASE("tau_bar estimates") {
  SimConfig cfg;
  SECTION("start outside (0,1)") {
    const CouplingModel model(power(1.2, 1, 1), cfg.epsilon);
    const auto e = estimate_tau_bar(model, 1.5, cfg, 100);
    REQUIRE(e.mean == 0.0);
    REQUIRE(e.censored_fraction == 0.0);
  }
  SECTION("atom chain exits at the first B event") {
    cfg.horizon = 1e6;
    const CouplingModel model(quarter_atoms(), cfg.epsilon);
    const auto e = estimate_tau_bar(model, 0.5, cfg, 10000);
    REQUIRE(std::abs(e.mean - 1.0) <= 4.0 * e.std_error);
    REQUIRE(e.censored_fraction == 0.0);
  }
}

TEST_CASE("atom chain tail against an exact oracle") {
  REQUIRE(atom_chain_survival(3.0) == Approx(0.4398270674591264).epsilon(1e-12));
  SimConfig cfg;
  cfg.horizon = 3.0;
  const CouplingModel model(quarter_atoms(), cfg.epsilon);
  const auto batch = simulate_batch(model, 0.5, cfg, 10000, coupling_run_options());
  const auto cell = lcp_cell(batch, 3.0);
  REQUIRE(std::abs(cell.p_late.mean - 0.4398270674591264) <= 4.0 * cell.p_late.std_error);
  const auto cell1 = lcp_cell(batch, 1.0);
  REQUIRE(std::abs(cell1.p_late.mean - atom_chain_survival(1.0)) <= 4.0 * cell1.p_late.std_error);

  const auto tb = tail_bound_check(batch, 3.0);
  REQUIRE(tb.pass);
  REQUIRE(tb.p_hat == cell.p_late.mean);
}

TEST_CASE("one-sided measure never couples") {
  SimConfig cfg;
  const CouplingModel model(power(1.2, 1, 0), cfg.epsilon);
  const std::vector<double> a{0.2, 0.05};
  const std::vector<double> e{0.5};
  for (const auto& c : lcp_criterion(model, a, e, cfg, 200)) {
    REQUIRE(c.p_late.mean == 1.0);
    REQUIRE_FALSE(c.below);
  }
  REQUIRE_THROWS_AS(tau_bar_bound_check(model, 0.2, cfg, 100), std::domain_error);
  // The tail bound holds for any measure; here it is carried by tau_bar = H.
  const auto tb = tail_bound_check(model, 0.2, 0.5, cfg, 200);
  REQUIRE(tb.p_hat == 1.0);
  REQUIRE(tb.pass);
}

TEST_CASE("power-law bounds") {
  SimConfig cfg;
  cfg.horizon = 5.0;
  const CouplingModel model(power(1.2, 1, 1), cfg.epsilon);
  const auto tb = tau_bar_bound_check(model, 0.1, cfg, 4000);
  REQUIRE(tb.pass);
  REQUIRE(tb.lhs > 0.0);
  REQUIRE(tau_bar_bound_check(model, 1.5, cfg, 10).pass);
}

TEST_CASE("law checks on the coupled pair") {
  SimConfig cfg;
  const CouplingModel model(power(1.2, 1, 1), cfg.epsilon);
  const std::vector<double> xi{0.5, 1.0, 2.0};
  const auto r = law_checks(model, 0.3, 1.0, xi, cfg, 5000);
  REQUIRE(r.cf.size() == 3);
  REQUIRE(r.tolerance == Approx(5.0 / std::sqrt(5000.0)));
  REQUIRE(r.invariant_failures == 0);
  REQUIRE(r.flips > 0);
  REQUIRE(r.pass);

  const auto s = sampler_law_check(model.nu(), xi, cfg, 5000);
  REQUIRE(s.pass);
  REQUIRE(s.expected_rate == Approx(2.0 * 3316.7264212791447));
}

TEST_CASE("sampler mean tracks big jumps") {
  SimConfig cfg;
  const LevyMeasure nu({PowerLaw{1.2, 1, 1}, BigJumps{{{2.0, 0.5}}}});
  const std::vector<double> xi{0.5};
  const auto s = sampler_law_check(nu, xi, cfg, 5000);
  REQUIRE(s.expected_mean == Approx(1.0));
  REQUIRE(s.mean_pass);
  REQUIRE(s.pass);
}

TEST_CASE("compensator residual has mean zero") {
  SimConfig cfg;
  cfg.workers = 2;
  const CouplingModel model(power(1.2, 1, 1), cfg.epsilon);
  const auto e = compensator_residual(model, 0.2, cfg, 5000);
  REQUIRE(std::abs(e.mean) <= 4.0 * e.std_error);
}

TEST_CASE("coupling bounds the empirical distance") {
  SimConfig cfg;
  const CouplingModel model(power(1.2, 1, 1), cfg.epsilon);
  const auto c = coupling_tv_bound(model, 0.1, cfg, 5000);
  REQUIRE(c.pass);
  REQUIRE(c.half_tv <= c.p_late.mean + 1e-12);
}

TEST_CASE("batch results do not depend on worker count") {
  SimConfig one;
  one.horizon = 2.0;
  SimConfig three = one;
  three.workers = 3;
  const CouplingModel model(power(1.2, 1, 1), one.epsilon);
  const auto s1 = summarize(simulate_batch(model, 0.1, one, 500, coupling_run_options()));
  const auto s3 = summarize(simulate_batch(model, 0.1, three, 500, coupling_run_options()));
  REQUIRE(s1.p_coupled == s3.p_coupled);
  REQUIRE(s1.p_stalled == s3.p_stalled);
  REQUIRE(s1.tau_bar.mean == s3.tau_bar.mean);
  REQUIRE(s1.tau_bar.std_error == s3.tau_bar.std_error);
  REQUIRE(s1.p_coupled + s1.p_exceeded + s1.p_stalled + s1.p_censored == Approx(1.0));
}
