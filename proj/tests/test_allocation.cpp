#include <cmath>

#include "doctest.h"
#include "windpool/allocation.hpp"
#include "windpool/hierarchy.hpp"
#include "windpool/market.hpp"

using namespace windpool;

namespace {

const PriceTriple kPrices{25.0, 4.0, 12.0};

// WPP1 {4,8}, WPP2 {6,12}: comonotone, sums {10,20}.
Eigen::MatrixXd comonotone() {
  Eigen::MatrixXd b(2, 2);
  b << 4, 6, 8, 12;
  return b;
}

// WPP1 {4,8}, WPP2 {16,2}: anti-comonotone, sums {20,10}.
Eigen::MatrixXd anti_comonotone() {
  Eigen::MatrixXd b(2, 2);
  b << 4, 16, 8, 2;
  return b;
}

AllocationVector allocate(const Eigen::MatrixXd& bottom, const PriceTriple& p, double capacity) {
  const int n = static_cast<int>(bottom.rows());
  std::vector<double> agg(n);
  for (int xi = 0; xi < n; ++xi) agg[xi] = bottom.row(xi).sum();
  OfferSolution sol = solve_offer(agg, p, capacity);
  Eigen::VectorXd agg_v = Eigen::Map<const Eigen::VectorXd>(agg.data(), n);
  return expected_allocation(bottom, sol.duals, agg_v);
}

}  // namespace

TEST_CASE("expected allocation on the comonotone hand instance") {
  AllocationVector alloc = allocate(comonotone(), kPrices, 100.0);
  CHECK(alloc.a[0] == doctest::Approx(8.0));
  CHECK(alloc.a[1] == doctest::Approx(12.0));
  CHECK(alloc.a.sum() == doctest::Approx(20.0));
}

TEST_CASE("expected allocation on the anti-comonotone hand instance") {
  AllocationVector alloc = allocate(anti_comonotone(), kPrices, 100.0);
  CHECK(alloc.a[0] == doctest::Approx(-8.0));
  CHECK(alloc.a[1] == doctest::Approx(28.0));
  CHECK(alloc.a.sum() == doctest::Approx(20.0));
}

TEST_CASE("single producer takes the whole expected cost") {
  Eigen::MatrixXd bottom(3, 1);
  bottom << 5, 9, 14;
  AllocationVector alloc = allocate(bottom, kPrices, 50.0);
  std::vector<double> scen{5.0, 9.0, 14.0};
  CHECK(alloc.a[0] == doctest::Approx(solve_offer(scen, kPrices, 50.0).expected_cost));
}

TEST_CASE("zero duals give a zero allocation") {
  Eigen::MatrixXd bottom(2, 2);
  bottom << 3, 4, 5, 6;
  Eigen::VectorXd duals = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd agg(2);
  agg << 7, 11;
  AllocationVector alloc = expected_allocation(bottom, duals, agg);
  CHECK(alloc.a == Eigen::VectorXd::Zero(2));
}

TEST_CASE("expected allocation rejects incoherent provenance") {
  Eigen::MatrixXd bottom(2, 2);
  bottom << 3, 4, 5, 6;
  Eigen::VectorXd duals(2);
  duals << 1, -1;
  Eigen::VectorXd wrong_agg(2);
  wrong_agg << 7, 12;
  CHECK_THROWS_AS(expected_allocation(bottom, duals, wrong_agg), NumericalError);
}

TEST_CASE("ex-post shares are proportional and budget-balanced") {
  AllocationVector alloc;
  alloc.a = Eigen::VectorXd(2);
  alloc.a << 8, 12;
  alloc.bottom_scenarios = comonotone();
  Eigen::VectorXd c = expost_shares(alloc, 10.0);
  CHECK(c[0] == doctest::Approx(4.0));
  CHECK(c[1] == doctest::Approx(6.0));
  CHECK(c.sum() == 10.0);

  CHECK(expost_shares(alloc, 0.0) == Eigen::VectorXd::Zero(2));
}

TEST_CASE("ex-post fallback splits by expected generation") {
  AllocationVector alloc;
  alloc.a = Eigen::VectorXd::Zero(2);
  alloc.bottom_scenarios = Eigen::MatrixXd(2, 2);
  alloc.bottom_scenarios << 4, 14, 6, 16;  // means (5, 15)
  Eigen::VectorXd c = expost_shares(alloc, 10.0);
  CHECK(c[0] == doctest::Approx(2.5));
  CHECK(c[1] == doctest::Approx(7.5));
  CHECK(c.sum() == 10.0);
}

TEST_CASE("ex-post fallback degrades to an equal split") {
  AllocationVector alloc;
  alloc.a = Eigen::VectorXd::Zero(3);
  alloc.bottom_scenarios = Eigen::MatrixXd::Zero(2, 3);
  Eigen::VectorXd c = expost_shares(alloc, 9.0);
  CHECK(c[0] == doctest::Approx(3.0));
  CHECK(c[1] == doctest::Approx(3.0));
  CHECK(c[2] == doctest::Approx(3.0));
}

TEST_CASE("budget balance is exact under the remainder rule") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = static_cast<int>(uniform_int(rng, 1, 6));
    const int n = static_cast<int>(uniform_int(rng, 2, 16));
    Eigen::MatrixXd bottom(n, m);
    for (int xi = 0; xi < n; ++xi) {
      for (int i = 0; i < m; ++i) bottom(xi, i) = 30.0 * uniform01(rng);
    }
    AllocationVector alloc = allocate(bottom, kPrices, 30.0 * m);
    const double realized = 500.0 * (uniform01(rng) - 0.1);
    Eigen::VectorXd c = expost_shares(alloc, realized);
    CHECK(sequential_sum(c) == realized);  // bit-exact, not approximate
  }
}

TEST_CASE("cooperative profit") {
  CHECK(cooperative_profit(10.0, 4.0, kPrices) == doctest::Approx(246.0));
  CHECK(cooperative_profit(8.0, 0.0, kPrices) == doctest::Approx(200.0));
  CHECK(cooperative_profit(0.0, 6.0, kPrices) == doctest::Approx(-6.0));
}

TEST_CASE("characteristic values of the hand coalitions") {
  Eigen::MatrixXd bottom = comonotone();
  std::vector<double> caps{50.0, 50.0};
  CHECK(characteristic_value({0}, bottom, kPrices, caps) == doctest::Approx(8.0));
  CHECK(characteristic_value({1}, bottom, kPrices, caps) == doctest::Approx(12.0));
  CHECK(characteristic_value({0, 1}, bottom, kPrices, caps) == doctest::Approx(20.0));
}

TEST_CASE("core audit accepts both hand instances") {
  SUBCASE("comonotone") {
    AllocationVector alloc = allocate(comonotone(), kPrices, 100.0);
    CoreAuditReport report = audit_core(alloc, kPrices, {50.0, 50.0});
    CHECK(report.is_core);
    CHECK(report.worst_violation <= 1e-6);
  }
  SUBCASE("anti-comonotone with a negative allocation") {
    AllocationVector alloc = allocate(anti_comonotone(), kPrices, 100.0);
    CoreAuditReport report = audit_core(alloc, kPrices, {50.0, 50.0});
    CHECK(report.is_core);
    CHECK(alloc.a.minCoeff() < 0.0);
  }
}

TEST_CASE("core audit flags a perturbed allocation") {
  AllocationVector alloc = allocate(anti_comonotone(), kPrices, 100.0);
  std::swap(alloc.a[0], alloc.a[1]);  // (28, -8): coalition {1} now exceeds l({1}) = 8
  CoreAuditReport report = audit_core(alloc, kPrices, {50.0, 50.0});
  CHECK_FALSE(report.is_core);
  CHECK(report.worst_violation > 1e-6);
}

TEST_CASE("core membership on random instances") {
  Rng rng(1234);
  for (int trial = 0; trial < 120; ++trial) {
    const int m = static_cast<int>(uniform_int(rng, 2, 8));
    const int n = static_cast<int>(uniform_int(rng, 2, 32));
    Eigen::MatrixXd bottom(n, m);
    std::vector<double> caps(m);
    for (int i = 0; i < m; ++i) caps[i] = 20.0 + 60.0 * uniform01(rng);
    for (int xi = 0; xi < n; ++xi) {
      for (int i = 0; i < m; ++i) bottom(xi, i) = caps[i] * uniform01(rng);
    }
    PriceTriple p{25.0, 0.2 + 8.0 * uniform01(rng), 0.2 + 8.0 * uniform01(rng)};
    double total_cap = 0.0;
    for (double c : caps) total_cap += c;
    std::vector<double> agg(n);
    for (int xi = 0; xi < n; ++xi) agg[xi] = bottom.row(xi).sum();
    OfferSolution sol = solve_offer(agg, p, total_cap);
    AllocationVector alloc = expected_allocation(
        bottom, sol.duals, Eigen::Map<const Eigen::VectorXd>(agg.data(), n));
    CoreAuditReport report = audit_core(alloc, p, caps);
    CHECK(report.is_core);
    CHECK(std::abs(alloc.a.sum() - sol.expected_cost) <= 1e-6);
  }
}

TEST_CASE("superadditivity audit") {
  SUBCASE("hand instances") {
    SuperadditivityReport r1 = audit_superadditivity(comonotone(), kPrices, {50.0, 50.0}, 100, 1);
    CHECK(r1.holds);
    SuperadditivityReport r2 =
        audit_superadditivity(anti_comonotone(), kPrices, {50.0, 50.0}, 100, 1);
    CHECK(r2.holds);
  }
  SUBCASE("identical producers scale exactly") {
    Eigen::MatrixXd bottom(3, 2);
    bottom << 5, 5, 9, 9, 13, 13;
    std::vector<double> caps{20.0, 20.0};
    const double l1 = characteristic_value({0}, bottom, kPrices, caps);
    const double l12 = characteristic_value({0, 1}, bottom, kPrices, caps);
    CHECK(l12 == doctest::Approx(2.0 * l1).epsilon(1e-12));
  }
  SUBCASE("random instances") {
    Rng rng(4321);
    for (int trial = 0; trial < 50; ++trial) {
      const int m = static_cast<int>(uniform_int(rng, 2, 6));
      const int n = static_cast<int>(uniform_int(rng, 2, 16));
      Eigen::MatrixXd bottom(n, m);
      std::vector<double> caps(m, 40.0);
      for (int xi = 0; xi < n; ++xi) {
        for (int i = 0; i < m; ++i) bottom(xi, i) = 40.0 * uniform01(rng);
      }
      CHECK(audit_superadditivity(bottom, kPrices, caps, 200, trial).holds);
    }
  }
}

TEST_CASE("allocation and characteristic values are positively homogeneous") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 3, n = 8;
    Eigen::MatrixXd bottom(n, m);
    std::vector<double> caps{30.0, 40.0, 50.0};
    for (int xi = 0; xi < n; ++xi) {
      for (int i = 0; i < m; ++i) bottom(xi, i) = caps[i] * uniform01(rng);
    }
    const double lambda = 0.25 + 4.0 * uniform01(rng);
    std::vector<double> caps_scaled{lambda * 30.0, lambda * 40.0, lambda * 50.0};

    AllocationVector alloc = allocate(bottom, kPrices, 120.0);
    AllocationVector alloc_scaled = allocate(lambda * bottom, kPrices, lambda * 120.0);
    for (int i = 0; i < m; ++i) {
      CHECK(alloc_scaled.a[i] == doctest::Approx(lambda * alloc.a[i]).epsilon(1e-10));
    }
    const double ls = characteristic_value({0, 2}, bottom, kPrices, caps);
    const double ls_scaled = characteristic_value({0, 2}, lambda * bottom, kPrices, caps_scaled);
    CHECK(ls_scaled == doctest::Approx(lambda * ls).epsilon(1e-10));
  }
}
