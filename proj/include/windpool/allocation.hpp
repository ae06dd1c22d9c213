#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "windpool/common.hpp"
#include "windpool/market.hpp"

namespace windpool {

/// Expected-cost allocation for one trading hour, with the duals and
/// reconciled bottom scenarios it was computed from kept as provenance.
struct AllocationVector {
  Eigen::VectorXd a;                 // currency/h, length m
  Eigen::VectorXd duals;             // currency/MWh, length N
  Eigen::MatrixXd bottom_scenarios;  // MW, N x m
};

/// a_i = (1/N) sum_xi bottom(xi, i) * duals(xi). The bottom scenarios must
/// sum (per scenario) to the aggregate used in the offer solve within
/// coherence_tol, otherwise the duals do not belong to these scenarios and
/// a NumericalError is thrown.
AllocationVector expected_allocation(const Eigen::MatrixXd& bottom_scenarios,
                                     const Eigen::VectorXd& duals,
                                     const Eigen::VectorXd& aggregate_scenarios,
                                     double coherence_tol = 1e-6);

/// Ex-post proportional split of the realized aggregate cost:
/// c_i = (a_i / sum a) * realized, with the last producer taking the exact
/// remainder so the split is budget-balanced bit-for-bit. When sum(a) is
/// numerically zero the split falls back to expected generation shares
/// (scenario means), then to an equal split.
Eigen::VectorXd expost_shares(const AllocationVector& alloc, double aggregate_realized_cost);

/// pi_f * actual_i - c_i.
double cooperative_profit(double actual_mw, double allocated_cost, const PriceTriple& p);

/// Stand-alone expected cost l(S) of a coalition offering the sum of its
/// members' scenarios. `members` holds 0-based producer indices.
double characteristic_value(const std::vector<int>& members,
                            const Eigen::MatrixXd& bottom_scenarios, const PriceTriple& p,
                            const std::vector<double>& capacities_mw);

struct CoalitionRow {
  std::uint32_t mask = 0;       // bit i set = producer i in S
  double value = 0.0;           // l(S)
  double allocated = 0.0;       // sum_{i in S} a_i
  double violation = 0.0;       // allocated - value
};

struct CoreAuditReport {
  bool is_core = false;
  double worst_violation = 0.0;  // max over proper subsets of allocated - l(S)
  double efficiency_gap = 0.0;   // |sum a - l(M)|
  std::vector<CoalitionRow> coalitions;
};

/// Exhaustive coalition audit (2^m - 1 solves; requires m <= 20): every
/// proper subset must keep allocated <= l(S) + tol and the grand total must
/// match l(M) within tol. Violations are reported, not thrown.
CoreAuditReport audit_core(const AllocationVector& alloc, const PriceTriple& p,
                           const std::vector<double>& capacities_mw, double tol = 1e-6);

struct SuperadditivityReport {
  bool holds = false;
  double worst_violation = 0.0;  // max of l(S u T) - l(S) - l(T)
  long long n_checked = 0;
};

/// Checks l(S u T) <= l(S) + l(T) + tol on disjoint coalition pairs;
/// exhaustive when feasible, otherwise n_pairs seeded random pairs.
SuperadditivityReport audit_superadditivity(const Eigen::MatrixXd& bottom_scenarios,
                                            const PriceTriple& p,
                                            const std::vector<double>& capacities_mw,
                                            long long n_pairs, std::uint64_t seed,
                                            double tol = 1e-6);

}  // namespace windpool
