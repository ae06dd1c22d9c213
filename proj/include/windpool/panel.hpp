#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "windpool/common.hpp"

namespace windpool {

/// Aligned multivariate scenario forecasts for the whole hierarchy, indexed
/// by (issuance time, lead time, scenario, series). Series 0 is the
/// aggregate. The scenario index is the cross-site coupling key: scenario xi
/// of every series belongs to one joint outcome.
///
/// Immutable by convention after construction/ingestion; share freely.
struct ScenarioPanel {
  std::vector<std::int64_t> issuance_times;  // ascending
  std::vector<int> lead_times;               // ascending, typically 1..24
  int n_scenarios = 0;
  std::vector<std::string> series;           // [aggregate, producers...]
  std::vector<double> values;                // (t, k, xi, s) row-major
  std::vector<double> observations;          // (t, k, s) row-major; empty if absent

  int n_issuance() const { return static_cast<int>(issuance_times.size()); }
  int n_leads() const { return static_cast<int>(lead_times.size()); }
  int n_series() const { return static_cast<int>(series.size()); }
  int n_producers() const { return n_series() - 1; }
  bool has_observations() const { return !observations.empty(); }
  long long n_cases() const { return static_cast<long long>(n_issuance()) * n_leads(); }

  std::size_t value_index(int t, int k, int xi, int s) const {
    return ((static_cast<std::size_t>(t) * n_leads() + k) * n_scenarios + xi) * n_series() + s;
  }
  std::size_t obs_index(int t, int k, int s) const {
    return (static_cast<std::size_t>(t) * n_leads() + k) * n_series() + s;
  }

  double value(int t, int k, int xi, int s) const { return values[value_index(t, k, xi, s)]; }
  double& value(int t, int k, int xi, int s) { return values[value_index(t, k, xi, s)]; }
  double observation(int t, int k, int s) const { return observations[obs_index(t, k, s)]; }

  /// N x (m+1) matrix of all scenarios for one (issuance, lead) case.
  Eigen::MatrixXd scenario_matrix(int t, int k) const;
  Eigen::VectorXd scenario_vector(int t, int k, int xi) const;
  Eigen::VectorXd observation_vector(int t, int k) const;

  static ScenarioPanel empty_like_shape(std::vector<std::int64_t> times, std::vector<int> leads,
                                        int n_scen, std::vector<std::string> series_names,
                                        bool with_observations);

  /// Shape consistency plus, when observations are present, aggregate
  /// coherence within obs_tol MW per (issuance, lead).
  void validate(double obs_tol = 1e-6) const;
};

inline constexpr const char* kAggregateSeriesName = "aggregate";

}  // namespace windpool
