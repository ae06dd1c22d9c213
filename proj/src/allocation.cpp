#include "windpool/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "windpool/hierarchy.hpp"

namespace windpool {

AllocationVector expected_allocation(const Eigen::MatrixXd& bottom_scenarios,
                                     const Eigen::VectorXd& duals,
                                     const Eigen::VectorXd& aggregate_scenarios,
                                     double coherence_tol) {
  const int n = static_cast<int>(bottom_scenarios.rows());
  const int m = static_cast<int>(bottom_scenarios.cols());
  if (n < 1 || m < 1) throw ConfigError("expected_allocation needs a nonempty scenario matrix");
  if (duals.size() != n || aggregate_scenarios.size() != n) {
    throw ConfigError("duals and aggregate scenarios must have one entry per scenario");
  }
  for (int xi = 0; xi < n; ++xi) {
    double row_sum = 0.0;
    for (int i = 0; i < m; ++i) row_sum += bottom_scenarios(xi, i);
    if (std::abs(row_sum - aggregate_scenarios[xi]) > coherence_tol) {
      throw NumericalError("bottom scenarios incoherent with solved aggregate at scenario " +
                           std::to_string(xi + 1) + ": sum " + format_double(row_sum) + " vs " +
                           format_double(aggregate_scenarios[xi]));
    }
  }
  AllocationVector out;
  out.duals = duals;
  out.bottom_scenarios = bottom_scenarios;
  out.a = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int xi = 0; xi < n; ++xi) acc += bottom_scenarios(xi, i) * duals[xi];
    out.a[i] = acc / n;
  }
  return out;
}

namespace {

// Remainder rule: the last producer absorbs rounding so the sequential sum
// of shares reproduces the realized cost bit-for-bit. Fails (returns false)
// when the shares are so large that no double can settle the residual.
bool settle(const Eigen::VectorXd& shares, double realized, Eigen::VectorXd& c) {
  const int m = static_cast<int>(shares.size());
  double assigned = 0.0;
  for (int i = 0; i + 1 < m; ++i) {
    c[i] = shares[i] * realized;
    assigned += c[i];
  }
  c[m - 1] = realized - assigned;
  for (int iter = 0; iter < 4 && assigned + c[m - 1] != realized; ++iter) {
    c[m - 1] += realized - (assigned + c[m - 1]);
  }
  return assigned + c[m - 1] == realized;
}

}  // namespace

Eigen::VectorXd expost_shares(const AllocationVector& alloc, double aggregate_realized_cost) {
  const int m = static_cast<int>(alloc.a.size());
  if (m < 1) throw ConfigError("expost_shares needs at least one producer");
  if (!std::isfinite(aggregate_realized_cost)) {
    throw ConfigError("realized cost must be finite");
  }

  // Proportional shares, falling back to expected-generation shares and then
  // an equal split when sum(a) is numerically zero (massive cancellation
  // included: such shares are noise and cannot settle exactly anyway).
  std::vector<Eigen::VectorXd> candidates;
  const double sum_a = sequential_sum(alloc.a);
  const double abs_scale = std::max(1.0, alloc.a.cwiseAbs().sum());
  if (std::abs(sum_a) > 1e-9 * abs_scale) {
    candidates.push_back(alloc.a / sum_a);
  }
  Eigen::VectorXd gen = Eigen::VectorXd::Zero(m);
  if (alloc.bottom_scenarios.rows() > 0 && alloc.bottom_scenarios.cols() == m) {
    for (int i = 0; i < m; ++i) gen[i] = alloc.bottom_scenarios.col(i).mean();
  }
  const double sum_g = sequential_sum(gen);
  if (std::abs(sum_g) > 1e-9 * std::max(1.0, gen.cwiseAbs().sum())) {
    candidates.push_back(gen / sum_g);
  }
  candidates.push_back(Eigen::VectorXd::Constant(m, 1.0 / m));

  Eigen::VectorXd c(m);
  for (const auto& shares : candidates) {
    if (settle(shares, aggregate_realized_cost, c)) return c;
  }
  // Unreachable for sane inputs: an equal split settles within one fix-up.
  c.setZero();
  c[0] = aggregate_realized_cost;
  return c;
}

double cooperative_profit(double actual_mw, double allocated_cost, const PriceTriple& p) {
  p.validate();
  if (!std::isfinite(actual_mw) || !std::isfinite(allocated_cost)) {
    throw ConfigError("cooperative profit needs finite inputs");
  }
  return p.pi_f * actual_mw - allocated_cost;
}

double characteristic_value(const std::vector<int>& members,
                            const Eigen::MatrixXd& bottom_scenarios, const PriceTriple& p,
                            const std::vector<double>& capacities_mw) {
  if (members.empty()) throw ConfigError("characteristic value needs a nonempty coalition");
  const int n = static_cast<int>(bottom_scenarios.rows());
  const int m = static_cast<int>(bottom_scenarios.cols());
  if (static_cast<int>(capacities_mw.size()) != m) {
    throw ConfigError("capacities must match the number of producers");
  }
  double coalition_capacity = 0.0;
  std::vector<double> summed(n, 0.0);
  for (int i : members) {
    if (i < 0 || i >= m) throw ConfigError("coalition member index out of range");
    coalition_capacity += capacities_mw[i];
    for (int xi = 0; xi < n; ++xi) summed[xi] += bottom_scenarios(xi, i);
  }
  return solve_offer(summed, p, coalition_capacity).expected_cost;
}

namespace {

std::vector<int> mask_members(std::uint32_t mask) {
  std::vector<int> members;
  for (int i = 0; mask != 0; ++i, mask >>= 1) {
    if (mask & 1u) members.push_back(i);
  }
  return members;
}

}  // namespace

CoreAuditReport audit_core(const AllocationVector& alloc, const PriceTriple& p,
                           const std::vector<double>& capacities_mw, double tol) {
  const int m = static_cast<int>(alloc.a.size());
  if (m > 20) throw ConfigError("exhaustive core audit limited to m <= 20 producers");
  if (alloc.bottom_scenarios.cols() != m) {
    throw ConfigError("allocation provenance scenarios do not match producer count");
  }
  CoreAuditReport report;
  const std::uint32_t full = (1u << m) - 1u;
  report.coalitions.reserve(full);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    CoalitionRow row;
    row.mask = mask;
    row.value = characteristic_value(mask_members(mask), alloc.bottom_scenarios, p, capacities_mw);
    double allocated = 0.0;
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) allocated += alloc.a[i];
    }
    row.allocated = allocated;
    row.violation = allocated - row.value;
    if (mask == full) {
      report.efficiency_gap = std::abs(row.violation);
    } else {
      worst = std::max(worst, row.violation);
    }
    report.coalitions.push_back(row);
  }
  report.worst_violation = (m == 1) ? 0.0 : worst;
  report.is_core = report.worst_violation <= tol && report.efficiency_gap <= tol;
  return report;
}

SuperadditivityReport audit_superadditivity(const Eigen::MatrixXd& bottom_scenarios,
                                            const PriceTriple& p,
                                            const std::vector<double>& capacities_mw,
                                            long long n_pairs, std::uint64_t seed, double tol) {
  const int m = static_cast<int>(bottom_scenarios.cols());
  if (m < 2) throw ConfigError("superadditivity audit needs at least two producers");
  if (m > 20) throw ConfigError("superadditivity audit limited to m <= 20 producers");

  SuperadditivityReport report;
  double worst = -std::numeric_limits<double>::infinity();
  auto check_pair = [&](std::uint32_t s_mask, std::uint32_t t_mask) {
    const double ls = characteristic_value(mask_members(s_mask), bottom_scenarios, p, capacities_mw);
    const double lt = characteristic_value(mask_members(t_mask), bottom_scenarios, p, capacities_mw);
    const double lu =
        characteristic_value(mask_members(s_mask | t_mask), bottom_scenarios, p, capacities_mw);
    worst = std::max(worst, lu - ls - lt);
    ++report.n_checked;
  };

  const std::uint32_t full = (1u << m) - 1u;
  // Unordered disjoint nonempty pairs: (3^m - 2^(m+1) + 1) / 2 in total.
  double n_exhaustive = (std::pow(3.0, m) - 2.0 * std::pow(2.0, m) + 1.0) / 2.0;
  if (n_exhaustive <= static_cast<double>(n_pairs)) {
    for (std::uint32_t s = 1; s <= full; ++s) {
      std::uint32_t rest = full & ~s;
      for (std::uint32_t t = rest; t != 0; t = (t - 1) & rest) {
        if (t < s) continue;  // count each unordered pair once
        check_pair(s, t);
      }
    }
  } else {
    Rng rng(mix_seed(seed, 0x5a5au, static_cast<std::uint64_t>(m)));
    while (report.n_checked < n_pairs) {
      std::uint32_t s = static_cast<std::uint32_t>(uniform_int(rng, 1, full));
      std::uint32_t rest = full & ~s;
      if (rest == 0) continue;
      std::uint32_t t = static_cast<std::uint32_t>(uniform_int(rng, 1, full)) & rest;
      if (t == 0) continue;
      check_pair(s, t);
    }
  }
  report.worst_violation = worst;
  report.holds = worst <= tol;
  return report;
}

}  // namespace windpool
