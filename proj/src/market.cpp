#include "windpool/market.hpp"

#include <algorithm>
#include <cmath>

namespace windpool {

void PriceTriple::validate() const {
  if (!std::isfinite(pi_f) || !std::isfinite(psi_plus) || !std::isfinite(psi_minus)) {
    throw ConfigError("prices must be finite");
  }
  if (psi_plus < 0.0 || psi_minus < 0.0) {
    throw ConfigError("imbalance penalties must be nonnegative (pi_up >= pi_f >= pi_dw)");
  }
}

double critical_ratio(const PriceTriple& p) {
  p.validate();
  if (p.psi_plus + p.psi_minus <= 0.0) {
    throw ConfigError("critical ratio undefined: both imbalance penalties are zero");
  }
  return p.psi_plus / (p.psi_plus + p.psi_minus);
}

namespace {

void check_scenarios(const std::vector<double>& s) {
  if (s.empty()) throw ConfigError("offer needs at least one scenario");
  for (double v : s) {
    if (!std::isfinite(v)) throw ConfigError("scenario values must be finite");
  }
}

// Smallest k in [1, N] with k * (psi+ + psi-) >= N * psi+, i.e. the
// ceil(alpha*N) order-statistic index without forming alpha*N in floating
// point (which can round across an integer boundary).
int quantile_index(int n, const PriceTriple& p) {
  const double lhs_unit = p.psi_plus + p.psi_minus;
  const double rhs = static_cast<double>(n) * p.psi_plus;
  for (int k = 1; k <= n; ++k) {
    if (static_cast<double>(k) * lhs_unit >= rhs) return k;
  }
  return n;
}

}  // namespace

double quantile_offer(const std::vector<double>& scenarios_mw, const PriceTriple& p) {
  check_scenarios(scenarios_mw);
  critical_ratio(p);  // validates the penalty pair
  std::vector<double> sorted = scenarios_mw;
  std::sort(sorted.begin(), sorted.end());
  const int k = quantile_index(static_cast<int>(sorted.size()), p);
  return sorted[k - 1];
}

double expected_imbalance_cost(const std::vector<double>& scenarios_mw, double offer,
                               const PriceTriple& p) {
  double total = 0.0;
  for (double y : scenarios_mw) {
    total += p.psi_plus * std::max(y - offer, 0.0) + p.psi_minus * std::max(offer - y, 0.0);
  }
  return total / static_cast<double>(scenarios_mw.size());
}

OfferSolution solve_offer(const std::vector<double>& scenarios_mw, const PriceTriple& p,
                          double capacity_mw) {
  check_scenarios(scenarios_mw);
  if (!(capacity_mw > 0.0) || !std::isfinite(capacity_mw)) {
    throw ConfigError("capacity must be positive");
  }
  const double slack = 1e-6 * std::max(1.0, capacity_mw);
  for (double y : scenarios_mw) {
    if (y < -slack || y > capacity_mw + slack) {
      throw ConfigError("scenario value " + format_double(y) +
                        " outside [0, capacity]; ingestion clipping should prevent this");
    }
  }

  const int n = static_cast<int>(scenarios_mw.size());
  OfferSolution sol;
  sol.offer = quantile_offer(scenarios_mw, p);
  sol.expected_cost = expected_imbalance_cost(scenarios_mw, sol.offer, p);
  sol.provenance = "analytic-quantile-dual";

  int n_above = 0, n_below = 0, n_at = 0;
  for (double y : scenarios_mw) {
    if (y > sol.offer) {
      ++n_above;
    } else if (y < sol.offer) {
      ++n_below;
    } else {
      ++n_at;
    }
  }
  // The offer is itself a scenario value, so n_at >= 1. Scenarios at the
  // offer share the largest feasible value keeping sum(duals) <= 0; for a
  // positive offer that pins sum(duals) = 0, closing the duality gap.
  const double shared =
      std::min(p.psi_plus, (p.psi_minus * n_below - p.psi_plus * n_above) / n_at);
  sol.duals.resize(n);
  for (int xi = 0; xi < n; ++xi) {
    const double y = scenarios_mw[xi];
    sol.duals[xi] = y > sol.offer ? p.psi_plus : (y < sol.offer ? -p.psi_minus : shared);
  }

  double dual_objective = 0.0;
  for (int xi = 0; xi < n; ++xi) dual_objective += sol.duals[xi] * scenarios_mw[xi];
  dual_objective /= n;
  const double gap = std::abs(sol.expected_cost - dual_objective);
  if (gap > 1e-6 * std::max(1.0, std::abs(sol.expected_cost))) {
    throw NumericalError("duality gap " + format_double(gap) + " between primal " +
                         format_double(sol.expected_cost) + " and dual " +
                         format_double(dual_objective));
  }
  return sol;
}

double realized_cost(double offer_mw, double actual_mw, const PriceTriple& p) {
  p.validate();
  if (!std::isfinite(offer_mw) || !std::isfinite(actual_mw)) {
    throw ConfigError("realized cost needs finite offer and actual");
  }
  return p.psi_minus * std::max(offer_mw - actual_mw, 0.0) +
         p.psi_plus * std::max(actual_mw - offer_mw, 0.0);
}

double independent_profit(double offer_mw, double actual_mw, const PriceTriple& p) {
  return p.pi_f * actual_mw - realized_cost(offer_mw, actual_mw, p);
}

}  // namespace windpool
