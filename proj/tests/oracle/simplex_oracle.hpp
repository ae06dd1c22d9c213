#pragma once

// Test-only LP machinery: an independent textbook simplex used as the oracle
// for the analytic offer/dual construction in the main library. Nothing here
// is linked into the shipped library or CLI.

#include <Eigen/Dense>
#include <vector>

#include "windpool/market.hpp"

namespace windpool::testing {

struct LpSolution {
  bool feasible = false;
  bool bounded = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

/// Two-phase dense tableau simplex with Bland's rule for
/// min c'x s.t. A x = b, x >= 0.
LpSolution solve_standard_form(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                               const Eigen::VectorXd& c);

struct OfferLpResult {
  double objective = 0.0;  // optimal expected imbalance cost
  double offer = 0.0;      // primal offer variable
};

/// The per-hour offer problem solved as an explicit LP over
/// (offer, surplus_1..N, shortfall_1..N, capacity slack).
OfferLpResult solve_offer_lp(const std::vector<double>& scenarios, const PriceTriple& p,
                             double capacity);

struct DualLpResult {
  double objective = 0.0;   // optimal dual objective
  Eigen::VectorXd duals;    // one value per scenario
};

/// The scenario-dual problem solved as an explicit LP (box constraints and
/// the nonpositive-mean constraint rewritten in standard form).
DualLpResult solve_dual_lp(const std::vector<double>& scenarios, const PriceTriple& p);

}  // namespace windpool::testing
