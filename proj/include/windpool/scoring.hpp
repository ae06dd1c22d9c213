#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "windpool/common.hpp"
#include "windpool/panel.hpp"

namespace windpool {

/// Energy score split into its accuracy and spread halves:
/// value = accuracy - spread, both pieces nonnegative.
struct EnergyScoreResult {
  double value = 0.0;     // MW
  double accuracy = 0.0;  // (1/N) sum_i ||s_i - y||
  double spread = 0.0;    // (1/(2N^2)) sum_ij ||s_i - s_j||
};

/// Exact double-sum energy score of an N x d scenario matrix against a
/// length-d observation.
EnergyScoreResult energy_score(const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& observation);

/// Gradient of the energy score value w.r.t. every scenario entry (N x d).
/// Norm gradients use u/||u||, taken as zero below 1e-12 so degenerate
/// points stay finite.
Eigen::MatrixXd energy_score_subgradient(const Eigen::MatrixXd& scenarios,
                                         const Eigen::VectorXd& observation);

/// Band-depth pre-rank of each row of an M x d matrix:
/// depth_j = (1/d) sum_k (M - r_jk)(r_jk - 1) with 1-based per-coordinate
/// ranks r_jk; rank ties resolve by seeded random keys.
Eigen::VectorXd band_depth_prerank(const Eigen::MatrixXd& vectors, Rng& rng);

/// Verification rank of the observation among the N scenarios: position of
/// its band depth within the N+1 ordered depths (ascending), depth ties
/// broken uniformly at random. Result lies in {1, ..., N+1}.
int multivariate_rank(const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& observation,
                      Rng& rng);

struct RankHistogram {
  std::vector<long long> counts;  // one bin per possible rank
  long long total = 0;
  std::vector<double> lower;  // consistency band, empty until attached
  std::vector<double> upper;

  int n_bins() const { return static_cast<int>(counts.size()); }
  std::vector<double> frequencies() const;
};

/// Bins ranks in {1..n_ranks} into an n_ranks-bin histogram.
RankHistogram make_rank_histogram(const std::vector<int>& ranks, int n_ranks);

/// Contiguous regrouping to n_display bins (used for coarse plots).
RankHistogram rebin_histogram(const RankHistogram& h, int n_display);

/// Pointwise band of bin counts a perfectly calibrated forecast would
/// produce: quantiles at (1 -/+ level)/2 of per-bin counts over n_sim
/// simulations of n_cases uniform ranks on {1..N+1}. Deterministic per seed.
std::pair<std::vector<double>, std::vector<double>> consistency_band(int n_scenarios,
                                                                     long long n_cases,
                                                                     double level, int n_sim,
                                                                     std::uint64_t seed);

void attach_consistency_band(RankHistogram& h, int n_scenarios, double level, int n_sim,
                             std::uint64_t seed);

/// sum_b |f_b - 1/B| over the histogram's bins.
double deviation_from_uniform(const RankHistogram& h);

/// Mean energy score over every (issuance, lead) case of a panel that
/// carries observations.
double average_energy_score(const ScenarioPanel& panel);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
};

/// Pearson chi-square test of the bin counts against the uniform
/// distribution.
ChiSquareResult chi_square_uniform(const std::vector<long long>& counts);

/// Regularized upper incomplete gamma Q(a, x); the chi-square survival
/// function is Q(dof/2, stat/2).
double gamma_q(double a, double x);

}  // namespace windpool
