#include <algorithm>
#include <limits>

#include "doctest.h"
#include "oracle/simplex_oracle.hpp"
#include "windpool/market.hpp"

using namespace windpool;

namespace {

// Smallest scenario value attaining the minimal expected cost; the LP
// minimizer set is an interval between order statistics, so this is the
// smallest LP minimizer whenever psi_plus > 0.
double brute_force_offer(const std::vector<double>& scen, const PriceTriple& p) {
  double best_cost = std::numeric_limits<double>::infinity();
  for (double candidate : scen) {
    best_cost = std::min(best_cost, expected_imbalance_cost(scen, candidate, p));
  }
  std::vector<double> sorted = scen;
  std::sort(sorted.begin(), sorted.end());
  for (double candidate : sorted) {
    if (expected_imbalance_cost(scen, candidate, p) <= best_cost + 1e-9) return candidate;
  }
  return sorted.back();
}

}  // namespace

TEST_CASE("critical ratio") {
  CHECK(critical_ratio({25.0, 4.0, 12.0}) == 0.25);
  CHECK(critical_ratio({25.0, 7.5, 7.5}) == 0.5);
  CHECK(critical_ratio({25.0, 0.0, 3.0}) == 0.0);
  CHECK_THROWS_AS(critical_ratio({25.0, 0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(critical_ratio({25.0, -1.0, 2.0}), ConfigError);
}

TEST_CASE("quantile offer hand cases") {
  PriceTriple p{25.0, 4.0, 12.0};
  SUBCASE("two scenarios, 0.25 quantile") {
    std::vector<double> scen{10.0, 20.0};
    CHECK(quantile_offer(scen, p) == 10.0);
    CHECK(expected_imbalance_cost(scen, 10.0, p) == doctest::Approx(20.0));
    CHECK(expected_imbalance_cost(scen, 20.0, p) == doctest::Approx(60.0));
  }
  SUBCASE("all scenarios equal") {
    CHECK(quantile_offer({7.0, 7.0, 7.0}, p) == 7.0);
  }
  SUBCASE("alpha * n exactly integer takes the lower order statistic") {
    PriceTriple median{25.0, 6.0, 6.0};
    CHECK(quantile_offer({4.0, 2.0, 1.0, 3.0}, median) == 2.0);
  }
  SUBCASE("alpha zero offers the scenario minimum") {
    PriceTriple zero_plus{25.0, 0.0, 5.0};
    CHECK(quantile_offer({9.0, 3.0, 5.0}, zero_plus) == 3.0);
  }
}

TEST_CASE("solve_offer hand instance with duals") {
  PriceTriple p{25.0, 4.0, 12.0};
  OfferSolution sol = solve_offer({10.0, 20.0}, p, 100.0);
  CHECK(sol.offer == 10.0);
  CHECK(sol.expected_cost == doctest::Approx(20.0));
  REQUIRE(sol.duals.size() == 2);
  CHECK(sol.duals[0] == doctest::Approx(-4.0));
  CHECK(sol.duals[1] == doctest::Approx(4.0));
}

TEST_CASE("solve_offer certainty case") {
  PriceTriple p{25.0, 4.0, 12.0};
  OfferSolution sol = solve_offer({50.0}, p, 100.0);
  CHECK(sol.offer == 50.0);
  CHECK(sol.expected_cost == 0.0);
  CHECK(sol.duals[0] == 0.0);
}

TEST_CASE("solve_offer matches the simplex oracle on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 12));
    std::vector<double> scen(n);
    for (double& v : scen) v = 120.0 * uniform01(rng);
    PriceTriple p{25.0, 0.25 + 10.0 * uniform01(rng), 0.25 + 10.0 * uniform01(rng)};
    OfferSolution sol = solve_offer(scen, p, 120.0);

    const auto primal = testing::solve_offer_lp(scen, p, 120.0);
    const auto dual = testing::solve_dual_lp(scen, p);
    CHECK(sol.expected_cost == doctest::Approx(primal.objective).epsilon(1e-9));
    CHECK(sol.expected_cost == doctest::Approx(dual.objective).epsilon(1e-9));

    double dual_obj = 0.0;
    for (int xi = 0; xi < n; ++xi) dual_obj += sol.duals[xi] * scen[xi];
    dual_obj /= n;
    CHECK(dual_obj == doctest::Approx(sol.expected_cost).epsilon(1e-9));
  }
}

TEST_CASE("quantile-LP equivalence and scenario-hull invariants") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 64));
    std::vector<double> scen(n);
    for (double& v : scen) v = 200.0 * uniform01(rng);
    PriceTriple p{25.0, 0.1 + 10.0 * uniform01(rng), 0.1 + 10.0 * uniform01(rng)};

    const double offer = quantile_offer(scen, p);
    CHECK(offer == brute_force_offer(scen, p));
    CHECK(offer >= *std::min_element(scen.begin(), scen.end()));
    CHECK(offer <= *std::max_element(scen.begin(), scen.end()));
  }
}

TEST_CASE("dual feasibility and nonpositive mean on random instances") {
  Rng rng(314);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 32));
    std::vector<double> scen(n);
    for (double& v : scen) v = 80.0 * uniform01(rng);
    PriceTriple p{25.0, 0.1 + 6.0 * uniform01(rng), 0.1 + 6.0 * uniform01(rng)};
    OfferSolution sol = solve_offer(scen, p, 80.0);
    CHECK(sol.duals.mean() <= 1e-9);
    for (int xi = 0; xi < n; ++xi) {
      CHECK(sol.duals[xi] >= -p.psi_minus - 1e-9);
      CHECK(sol.duals[xi] <= p.psi_plus + 1e-9);
    }
  }
}

TEST_CASE("expected cost is monotone in the penalties") {
  Rng rng(555);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 2, 24));
    std::vector<double> scen(n);
    for (double& v : scen) v = 60.0 * uniform01(rng);
    const double psi_p = 0.2 + 8.0 * uniform01(rng);
    const double psi_m = 0.2 + 8.0 * uniform01(rng);
    const double base = solve_offer(scen, {25.0, psi_p, psi_m}, 60.0).expected_cost;
    CHECK(solve_offer(scen, {25.0, psi_p * 0.5, psi_m}, 60.0).expected_cost <= base + 1e-12);
    CHECK(solve_offer(scen, {25.0, psi_p, psi_m * 0.5}, 60.0).expected_cost <= base + 1e-12);
  }
}

TEST_CASE("realized cost and profits") {
  PriceTriple p{25.0, 4.0, 12.0};
  CHECK(realized_cost(10.0, 10.0, p) == 0.0);
  CHECK(realized_cost(10.0, 14.0, p) == doctest::Approx(16.0));
  CHECK(realized_cost(10.0, 4.0, p) == doctest::Approx(72.0));

  CHECK(independent_profit(10.0, 10.0, p) == doctest::Approx(250.0));
  CHECK(independent_profit(10.0, 14.0, p) == doctest::Approx(334.0));
  CHECK(independent_profit(0.0, 0.0, p) == 0.0);
}

TEST_CASE("solve_offer rejects out-of-range scenarios") {
  PriceTriple p{25.0, 4.0, 12.0};
  CHECK_THROWS_AS(solve_offer({150.0}, p, 100.0), ConfigError);
  CHECK_THROWS_AS(solve_offer({-5.0}, p, 100.0), ConfigError);
}
