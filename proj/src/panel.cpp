#include "windpool/panel.hpp"

#include <algorithm>
#include <cmath>

#include "windpool/hierarchy.hpp"

namespace windpool {

Eigen::MatrixXd ScenarioPanel::scenario_matrix(int t, int k) const {
  Eigen::MatrixXd out(n_scenarios, n_series());
  for (int xi = 0; xi < n_scenarios; ++xi) {
    for (int s = 0; s < n_series(); ++s) out(xi, s) = value(t, k, xi, s);
  }
  return out;
}

Eigen::VectorXd ScenarioPanel::scenario_vector(int t, int k, int xi) const {
  Eigen::VectorXd out(n_series());
  for (int s = 0; s < n_series(); ++s) out[s] = value(t, k, xi, s);
  return out;
}

Eigen::VectorXd ScenarioPanel::observation_vector(int t, int k) const {
  Eigen::VectorXd out(n_series());
  for (int s = 0; s < n_series(); ++s) out[s] = observation(t, k, s);
  return out;
}

ScenarioPanel ScenarioPanel::empty_like_shape(std::vector<std::int64_t> times,
                                              std::vector<int> leads, int n_scen,
                                              std::vector<std::string> series_names,
                                              bool with_observations) {
  ScenarioPanel p;
  p.issuance_times = std::move(times);
  p.lead_times = std::move(leads);
  p.n_scenarios = n_scen;
  p.series = std::move(series_names);
  p.values.assign(static_cast<std::size_t>(p.n_issuance()) * p.n_leads() * p.n_scenarios *
                      p.n_series(),
                  0.0);
  if (with_observations) {
    p.observations.assign(static_cast<std::size_t>(p.n_issuance()) * p.n_leads() * p.n_series(),
                          0.0);
  }
  return p;
}

void ScenarioPanel::validate(double obs_tol) const {
  if (series.size() < 2) throw ConfigError("panel needs an aggregate series and at least one producer");
  if (series[0] != kAggregateSeriesName) {
    throw ConfigError("panel series 0 must be '" + std::string(kAggregateSeriesName) + "'");
  }
  if (n_scenarios < 1) throw ConfigError("panel needs at least one scenario");
  if (issuance_times.empty() || lead_times.empty()) {
    throw ConfigError("panel needs at least one issuance time and one lead time");
  }
  if (!std::is_sorted(issuance_times.begin(), issuance_times.end())) {
    throw ConfigError("panel issuance times must be ascending");
  }
  const std::size_t expect_values =
      static_cast<std::size_t>(n_issuance()) * n_leads() * n_scenarios * n_series();
  if (values.size() != expect_values) throw ConfigError("panel value array has wrong size");
  if (!observations.empty()) {
    const std::size_t expect_obs = static_cast<std::size_t>(n_issuance()) * n_leads() * n_series();
    if (observations.size() != expect_obs) throw ConfigError("panel observation array has wrong size");
    for (int t = 0; t < n_issuance(); ++t) {
      for (int k = 0; k < n_leads(); ++k) {
        Eigen::VectorXd y = observation_vector(t, k);
        if (!is_coherent(y, obs_tol)) {
          throw ConfigError("incoherent observation at issuance " +
                            std::to_string(issuance_times[t]) + ", lead " +
                            std::to_string(lead_times[k]) + ": aggregate " + format_double(y[0]) +
                            " vs producer sum " + format_double(sequential_sum(y.tail(y.size() - 1))));
        }
      }
    }
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("panel contains a non-finite forecast value");
  }
  for (double v : observations) {
    if (!std::isfinite(v)) throw ConfigError("panel contains a non-finite observation");
  }
}

}  // namespace windpool
