#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "windpool/common.hpp"

namespace windpool {

/// Day-ahead price plus dual-price imbalance penalties (currency/MWh).
/// psi_plus = pi_f - pi_dw (surplus leg), psi_minus = pi_up - pi_f
/// (shortfall leg); both nonnegative by market design.
struct PriceTriple {
  double pi_f = 0.0;
  double psi_plus = 0.0;
  double psi_minus = 0.0;

  void validate() const;
};

/// Result of the per-hour offer solve: the offer, its optimal expected
/// imbalance cost, and one dual value per scenario.
struct OfferSolution {
  double offer = 0.0;          // MW
  double expected_cost = 0.0;  // currency/h
  Eigen::VectorXd duals;       // currency/MWh, length N
  std::string provenance;
};

/// psi_plus / (psi_plus + psi_minus). Throws when both penalties are zero
/// (every offer is optimal, so the quantile is undefined).
double critical_ratio(const PriceTriple& p);

/// Empirical quantile offer: the ceil(alpha*N)-th order statistic at
/// alpha = critical_ratio (1st order statistic when alpha = 0). This is the
/// smallest minimizer of the expected imbalance cost over the scenarios.
double quantile_offer(const std::vector<double>& scenarios_mw, const PriceTriple& p);

/// Mean imbalance cost of a fixed offer over the scenarios, currency/h.
double expected_imbalance_cost(const std::vector<double>& scenarios_mw, double offer,
                               const PriceTriple& p);

/// Solves the per-hour two-stage offer problem on the given scenarios.
/// The primal is the quantile offer; duals are assigned analytically:
/// +psi_plus above the offer, -psi_minus below, and scenarios at the offer
/// share the largest value in [-psi_minus, psi_plus] keeping mean(duals) <= 0
/// and the dual objective equal to the primal one. Throws NumericalError if
/// the duality gap exceeds 1e-6 * max(1, primal).
OfferSolution solve_offer(const std::vector<double>& scenarios_mw, const PriceTriple& p,
                          double capacity_mw);

/// Realized dual-price imbalance cost of (offer, actual), currency/h.
double realized_cost(double offer_mw, double actual_mw, const PriceTriple& p);

/// Profit of a producer trading alone: energy revenue minus realized
/// imbalance cost.
double independent_profit(double offer_mw, double actual_mw, const PriceTriple& p);

}  // namespace windpool
