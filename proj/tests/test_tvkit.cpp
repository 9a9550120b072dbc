#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "lcpkit/rng.hpp"
#include "lcpkit/stats.hpp"
#include "lcpkit/tvkit.hpp"

using namespace lcpkit;
using Catch::Approx;

namespace {

DiscreteDist random_dist(std::mt19937_64& rng, int max_support) {
  std::uniform_int_distribution<int> pick(-max_support, max_support);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  std::vector<std::pair<double, double>> pairs;
  const int k = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < k; ++i) {
    pairs.emplace_back(pick(rng), w(rng) + 1e-3);
  }
  return DiscreteDist::from_weights(pairs);
}

std::vector<double> random_prob(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) {
    x = e(rng);
    s += x;
  }
  for (auto& x : v) {
    x /= s;
  }
  return v;
}

}  // namespace

TEST_CASE("discrete distributions validate their input") {
  REQUIRE_THROWS_AS(DiscreteDist({0.0, 1.0}, {0.5, 0.6}), std::invalid_argument);
  REQUIRE_THROWS_AS(DiscreteDist({1.0, 0.0}, {0.5, 0.5}), std::invalid_argument);
  REQUIRE_THROWS_AS(DiscreteDist({0.0}, {-1.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(DiscreteDist({}, {}), std::invalid_argument);
  const auto d = DiscreteDist::from_weights({{2.0, 1.0}, {0.0, 2.0}, {2.0, 1.0}});
  REQUIRE(d.size() == 2);
  REQUIRE(d.prob_at(0.0) == 0.5);
  REQUIRE(d.prob_at(2.0) == 0.5);
  REQUIRE(d.prob_at(1.0) == 0.0);
}

TEST_CASE("discrete total variation") {
  const DiscreteDist p({0.0, 1.0}, {0.5, 0.5});
  const DiscreteDist q({0.0, 1.0}, {0.8, 0.2});
  REQUIRE(tv_discrete(p, q) == Approx(0.6).epsilon(1e-15));
  REQUIRE(tv_discrete(p, p) == 0.0);
  REQUIRE(tv_discrete(DiscreteDist({0.0}, {1.0}), DiscreteDist({1.0}, {1.0})) == 2.0);

  SECTION("metric axioms on random triples") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
      const auto a = random_dist(rng, 4);
      const auto b = random_dist(rng, 4);
      const auto c = random_dist(rng, 4);
      const double ab = tv_discrete(a, b);
      REQUIRE(ab >= 0.0);
      REQUIRE(ab <= 2.0);
      REQUIRE(ab == Approx(tv_discrete(b, a)).margin(1e-15));
      REQUIRE(tv_discrete(a, a) == 0.0);
      REQUIRE(tv_discrete(a, c) <= ab + tv_discrete(b, c) + 1e-12);
    }
  }
}

TEST_CASE("maximal coupling") {
  const DiscreteDist p({0.0, 1.0}, {0.5, 0.5});
  const DiscreteDist q({0.0, 1.0}, {0.8, 0.2});
  const MaximalCoupling mc(p, q);
  REQUIRE(mc.meet_probability() == Approx(0.7).epsilon(1e-15));

  CounterRng rng(1, 0, 3);
  const int n = 100000;
  int same = 0;
  int x0 = 0;
  int y0 = 0;
  for (int i = 0; i < n; ++i) {
    const auto [x, y] = mc(rng);
    same += x == y;
    x0 += x == 0.0;
    y0 += y == 0.0;
  }
  REQUIRE(std::abs(same / double(n) - 0.7) <= 0.006);
  REQUIRE(std::abs(x0 / double(n) - 0.5) <= 4.0 * std::sqrt(0.25 / n));
  REQUIRE(std::abs(y0 / double(n) - 0.8) <= 4.0 * std::sqrt(0.16 / n));

  SECTION("disjoint and identical laws") {
    const MaximalCoupling apart(DiscreteDist({0.0}, {1.0}), DiscreteDist({1.0}, {1.0}));
    REQUIRE(apart.meet_probability() == 0.0);
    const auto [x, y] = apart(rng);
    REQUIRE(x == 0.0);
    REQUIRE(y == 1.0);
    const MaximalCoupling same_law(p, p);
    REQUIRE(same_law.meet_probability() == Approx(1.0));
    for (int i = 0; i < 100; ++i) {
      const auto [u, v] = maximal_coupling(p, p, rng);
      REQUIRE(u == v);
    }
  }
  SECTION("random pairs: meet rate and both marginals") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 50; ++trial) {
      const auto a = random_dist(gen, 3);
      const auto b = random_dist(gen, 3);
      const MaximalCoupling m(a, b);
      REQUIRE(m.meet_probability() == Approx(1.0 - 0.5 * tv_discrete(a, b)).margin(1e-12));
      const std::size_t draws = 20000;
      std::size_t meets = 0;
      std::map<double, std::size_t> cx;
      std::map<double, std::size_t> cy;
      for (std::size_t i = 0; i < draws; ++i) {
        const auto [x, y] = m(rng);
        meets += x == y;
        ++cx[x];
        ++cy[y];
      }
      REQUIRE(wilson_interval(meets, draws, 4.0).contains(m.meet_probability()));
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double pr = a.probs()[k];
        REQUIRE(std::abs(cx[a.support()[k]] / double(draws) - pr) <=
                4.0 * std::sqrt(pr * (1 - pr) / draws) + 1e-12);
      }
      for (std::size_t k = 0; k < b.size(); ++k) {
        const double pr = b.probs()[k];
        REQUIRE(std::abs(cy[b.support()[k]] / double(draws) - pr) <=
                4.0 * std::sqrt(pr * (1 - pr) / draws) + 1e-12);
      }
    }
  }
}

TEST_CASE("kernel contraction") {
  const std::vector<double> p{1.0, 0.0, 0.0};
  const std::vector<double> q{0.0, 0.0, 1.0};

  SECTION("identity keeps the distance") {
    const Matrix I{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (double v : kernel_contraction(p, q, I, 5)) {
      REQUIRE(v == 2.0);
    }
  }
  SECTION("equal rows couple in one step") {
    const Matrix P{{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}};
    const auto seq = kernel_contraction(p, q, P, 3);
    REQUIRE(seq.size() == 4);
    REQUIRE(seq[0] == 2.0);
    REQUIRE(seq[1] == Approx(0.0).margin(1e-15));
  }
  SECTION("random four-state chains against brute-force products") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 100; ++trial) {
      Matrix P;
      for (int i = 0; i < 4; ++i) {
        P.push_back(random_prob(rng, 4));
      }
      const auto a = random_prob(rng, 4);
      const auto b = random_prob(rng, 4);
      const auto seq = kernel_contraction(a, b, P, 3);
      std::vector<double> x = a;
      std::vector<double> y = b;
      for (std::size_t k = 0; k <= 3; ++k) {
        double tv = 0.0;
        for (int i = 0; i < 4; ++i) {
          tv += std::abs(x[i] - y[i]);
        }
        REQUIRE(seq[k] == Approx(tv).margin(1e-13));
        if (k > 0) {
          REQUIRE(seq[k] <= seq[k - 1] + 1e-12);
        }
        std::vector<double> nx(4, 0.0);
        std::vector<double> ny(4, 0.0);
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) {
            nx[j] += x[i] * P[i][j];
            ny[j] += y[i] * P[i][j];
          }
        }
        x = nx;
        y = ny;
      }
    }
  }
  SECTION("rejects non-stochastic input") {
    REQUIRE_THROWS_AS(kernel_contraction(p, q, Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0.5, 0.6}}, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(kernel_contraction(p, {1.0}, Matrix{{1}}, 1), std::invalid_argument);
  }
}

TEST_CASE("translation profiles") {
  SECTION("uniform density gives 2a") {
    const auto u = DensityFn::uniform();
    REQUIRE(std::abs(tv_density_shift(u, 0.1) - 0.2) <= 1e-9);
    const std::vector<double> grid{0.4, 0.2, 0.1};
    const auto prof = translation_profile(u, grid);
    REQUIRE(prof.size() == 3);
    for (const auto& pt : prof) {
      REQUIRE(std::abs(pt.tv - 2.0 * pt.a) <= 1e-9);
    }
    REQUIRE(prof[0].tv > prof[1].tv);
    REQUIRE(prof[1].tv > prof[2].tv);
    REQUIRE(std::abs(tv_density_shift(u, -0.3) - 0.6) <= 1e-9);
    REQUIRE(tv_density_shift(u, 1.5) == Approx(2.0).margin(1e-9));
  }
  SECTION("triangle density has the closed form") {
    // For a symmetric unimodal law the shifted densities cross once at -a/2,
    // so tv(a) = 2 (F(a/2) - F(-a/2)) = 2a - a^2/2 on the triangle.
    const DensityFn tri{[](double x) { return 1.0 - std::abs(x); }, -1.0, 1.0, {0.0}};
    for (double a : {0.05, 0.2, 0.5, 0.9}) {
      const double closed = 2.0 * a - 0.5 * a * a;
      REQUIRE(std::abs(tv_density_shift(tri, a) - closed) <= 1e-9);
    }
  }
  SECTION("atoms are at distance 2 for every small shift") {
    const DiscreteDist d({0.0, 1.0}, {0.3, 0.7});
    const std::vector<double> grid{0.4, 0.1, 1e-6};
    for (const auto& pt : translation_profile(d, grid)) {
      REQUIRE(pt.tv == 2.0);
    }
    const std::vector<double> zero{0.0};
    REQUIRE(translation_profile(d, zero)[0].tv == 0.0);
  }
}

TEST_CASE("empirical total variation") {
  const std::vector<double> xs{0.01, 0.02, 0.5};
  const std::vector<double> ys{0.01, 0.5, 0.9};
  REQUIRE(tv_empirical(xs, xs, 0.1) == 0.0);
  REQUIRE(tv_empirical(std::vector<double>{0.0}, std::vector<double>{5.0}, 0.1) == 2.0);
  REQUIRE(tv_empirical(xs, ys, 0.1) == Approx(2.0 / 3.0));
  REQUIRE_THROWS_AS(tv_empirical(xs, ys, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(tv_empirical(std::vector<double>{}, ys, 0.1), std::invalid_argument);

  SECTION("approaches the exact value for large samples") {
    const DiscreteDist p({0.0, 1.0}, {0.5, 0.5});
    const DiscreteDist q({0.0, 1.0}, {0.8, 0.2});
    CounterRng rng(8);
    std::vector<double> a;
    std::vector<double> b;
    for (int i = 0; i < 100000; ++i) {
      a.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
      b.push_back(rng.uniform() < 0.8 ? 0.0 : 1.0);
    }
    REQUIRE(std::abs(tv_empirical(a, b, 0.5) - 0.6) <= 0.02);
  }
}
