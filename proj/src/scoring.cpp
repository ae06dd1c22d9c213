#include "windpool/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace windpool {

namespace {

void check_finite(const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& observation) {
  if (scenarios.rows() < 1) throw ConfigError("energy score needs at least one scenario");
  if (scenarios.cols() != observation.size()) {
    throw ConfigError("scenario dimension does not match the observation");
  }
  if (!scenarios.allFinite() || !observation.allFinite()) {
    throw ConfigError("energy score inputs must be finite");
  }
}

constexpr double kNormFloor = 1e-12;

}  // namespace

EnergyScoreResult energy_score(const Eigen::MatrixXd& scenarios,
                               const Eigen::VectorXd& observation) {
  check_finite(scenarios, observation);
  const int n = static_cast<int>(scenarios.rows());

  double accuracy = 0.0;
  for (int i = 0; i < n; ++i) accuracy += (scenarios.row(i).transpose() - observation).norm();
  accuracy /= n;

  double spread = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) spread += (scenarios.row(i) - scenarios.row(j)).norm();
  }
  spread /= static_cast<double>(n) * n;  // off-diagonal pairs count twice, halved

  EnergyScoreResult r;
  r.accuracy = accuracy;
  r.spread = spread;
  r.value = accuracy - spread;
  return r;
}

Eigen::MatrixXd energy_score_subgradient(const Eigen::MatrixXd& scenarios,
                                         const Eigen::VectorXd& observation) {
  check_finite(scenarios, observation);
  const int n = static_cast<int>(scenarios.rows());
  const int d = static_cast<int>(scenarios.cols());

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd diff = scenarios.row(i).transpose() - observation;
    double norm = diff.norm();
    if (norm >= kNormFloor) grad.row(i) = diff.transpose() / (norm * n);
  }
  const double pair_scale = 1.0 / (static_cast<double>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Eigen::VectorXd diff = scenarios.row(i) - scenarios.row(j);
      double norm = diff.norm();
      if (norm < kNormFloor) continue;
      grad.row(i) -= diff.transpose() * (pair_scale / norm);
      grad.row(j) += diff.transpose() * (pair_scale / norm);
    }
  }
  return grad;
}

Eigen::VectorXd band_depth_prerank(const Eigen::MatrixXd& vectors, Rng& rng) {
  const int m = static_cast<int>(vectors.rows());
  const int d = static_cast<int>(vectors.cols());
  if (m < 2) throw ConfigError("band depth needs at least two vectors");
  if (!vectors.allFinite()) throw ConfigError("band depth inputs must be finite");

  Eigen::VectorXd depth = Eigen::VectorXd::Zero(m);
  std::vector<int> order(m);
  std::vector<double> tiebreak(m);
  for (int k = 0; k < d; ++k) {
    for (int j = 0; j < m; ++j) tiebreak[j] = uniform01(rng);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (vectors(a, k) != vectors(b, k)) return vectors(a, k) < vectors(b, k);
      return tiebreak[a] < tiebreak[b];
    });
    for (int pos = 0; pos < m; ++pos) {
      const double rank = pos + 1;
      depth[order[pos]] += (m - rank) * (rank - 1);
    }
  }
  return depth / d;
}

int multivariate_rank(const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& observation,
                      Rng& rng) {
  check_finite(scenarios, observation);
  const int n = static_cast<int>(scenarios.rows());
  Eigen::MatrixXd stacked(n + 1, scenarios.cols());
  stacked.topRows(n) = scenarios;
  stacked.row(n) = observation.transpose();

  Eigen::VectorXd depth = band_depth_prerank(stacked, rng);
  const double obs_depth = depth[n];
  int below = 0, tied = 0;
  for (int j = 0; j < n; ++j) {
    if (depth[j] < obs_depth) {
      ++below;
    } else if (depth[j] == obs_depth) {
      ++tied;
    }
  }
  int rank = 1 + below;
  if (tied > 0) rank += static_cast<int>(uniform_int(rng, 0, tied));
  return rank;
}

std::vector<double> RankHistogram::frequencies() const {
  std::vector<double> f(counts.size(), 0.0);
  if (total <= 0) return f;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    f[b] = static_cast<double>(counts[b]) / static_cast<double>(total);
  }
  return f;
}

RankHistogram make_rank_histogram(const std::vector<int>& ranks, int n_ranks) {
  if (n_ranks < 1) throw ConfigError("histogram needs at least one bin");
  RankHistogram h;
  h.counts.assign(n_ranks, 0);
  for (int r : ranks) {
    if (r < 1 || r > n_ranks) {
      throw ConfigError("rank " + std::to_string(r) + " outside {1.." + std::to_string(n_ranks) + "}");
    }
    ++h.counts[r - 1];
    ++h.total;
  }
  return h;
}

RankHistogram rebin_histogram(const RankHistogram& h, int n_display) {
  const int b = h.n_bins();
  if (n_display < 1 || n_display > b) throw ConfigError("invalid display bin count");
  RankHistogram out;
  out.counts.assign(n_display, 0);
  out.total = h.total;
  const bool bands = !h.lower.empty();
  if (bands) {
    out.lower.assign(n_display, 0.0);
    out.upper.assign(n_display, 0.0);
  }
  for (int g = 0; g < n_display; ++g) {
    const int begin = static_cast<int>((static_cast<long long>(g) * b) / n_display);
    const int end = static_cast<int>((static_cast<long long>(g + 1) * b) / n_display);
    for (int i = begin; i < end; ++i) {
      out.counts[g] += h.counts[i];
      if (bands) {
        out.lower[g] += h.lower[i];
        out.upper[g] += h.upper[i];
      }
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> consistency_band(int n_scenarios,
                                                                     long long n_cases,
                                                                     double level, int n_sim,
                                                                     std::uint64_t seed) {
  if (n_scenarios < 1 || n_cases < 1 || n_sim < 1) {
    throw ConfigError("consistency band needs positive scenario, case and simulation counts");
  }
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("band level must lie in (0, 1)");
  const int n_bins = n_scenarios + 1;
  // sims x bins count table from uniform ranks
  std::vector<std::vector<long long>> sims(static_cast<std::size_t>(n_sim),
                                           std::vector<long long>(n_bins, 0));
  Rng rng(mix_seed(seed, 0xb4bd, static_cast<std::uint64_t>(n_bins)));
  for (int s = 0; s < n_sim; ++s) {
    auto& counts = sims[s];
    for (long long c = 0; c < n_cases; ++c) {
      ++counts[uniform_int(rng, 0, n_bins - 1)];
    }
  }
  const double lo_q = (1.0 - level) / 2.0;
  const double hi_q = 1.0 - lo_q;
  auto order_stat = [n_sim](std::vector<double>& v, double q) {
    long long k = static_cast<long long>(std::ceil(q * n_sim));
    k = std::clamp<long long>(k, 1, n_sim);
    std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
    return v[k - 1];
  };
  std::vector<double> lower(n_bins), upper(n_bins), column(n_sim);
  for (int bin = 0; bin < n_bins; ++bin) {
    for (int s = 0; s < n_sim; ++s) column[s] = static_cast<double>(sims[s][bin]);
    std::vector<double> tmp = column;
    lower[bin] = order_stat(tmp, lo_q);
    tmp = column;
    upper[bin] = order_stat(tmp, hi_q);
  }
  return {lower, upper};
}

void attach_consistency_band(RankHistogram& h, int n_scenarios, double level, int n_sim,
                             std::uint64_t seed) {
  if (h.n_bins() != n_scenarios + 1) {
    throw ConfigError("histogram bin count does not match n_scenarios + 1");
  }
  auto [lower, upper] = consistency_band(n_scenarios, h.total, level, n_sim, seed);
  h.lower = std::move(lower);
  h.upper = std::move(upper);
}

double deviation_from_uniform(const RankHistogram& h) {
  if (h.total <= 0) throw ConfigError("deviation needs a nonempty histogram");
  const double uniform = 1.0 / h.n_bins();
  double dev = 0.0;
  for (double f : h.frequencies()) dev += std::abs(f - uniform);
  return dev;
}

double average_energy_score(const ScenarioPanel& panel) {
  if (!panel.has_observations()) {
    throw ConfigError("average energy score needs observations in the panel");
  }
  double total = 0.0;
  for (int t = 0; t < panel.n_issuance(); ++t) {
    for (int k = 0; k < panel.n_leads(); ++k) {
      total += energy_score(panel.scenario_matrix(t, k), panel.observation_vector(t, k)).value;
    }
  }
  return total / static_cast<double>(panel.n_cases());
}

namespace {

// Regularized incomplete gamma by series (x < a+1) or continued fraction.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ConfigError("gamma_q needs a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

ChiSquareResult chi_square_uniform(const std::vector<long long>& counts) {
  if (counts.size() < 2) throw ConfigError("chi-square test needs at least two bins");
  long long total = 0;
  for (long long c : counts) {
    if (c < 0) throw ConfigError("negative bin count");
    total += c;
  }
  if (total <= 0) throw ConfigError("chi-square test needs a nonempty histogram");
  const double expected = static_cast<double>(total) / counts.size();
  ChiSquareResult r;
  for (long long c : counts) {
    const double diff = c - expected;
    r.statistic += diff * diff / expected;
  }
  r.dof = static_cast<int>(counts.size()) - 1;
  r.p_value = gamma_q(r.dof / 2.0, r.statistic / 2.0);
  return r;
}

}  // namespace windpool
