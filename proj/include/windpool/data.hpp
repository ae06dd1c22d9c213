#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "windpool/common.hpp"
#include "windpool/hierarchy.hpp"
#include "windpool/panel.hpp"

namespace windpool {

struct SiteSpec {
  std::string name;
  double capacity_mw = 0.0;
};

/// Where a dataset lives and how to slice it. File paths are resolved
/// relative to the manifest's own directory when loaded from disk.
struct DatasetManifest {
  std::vector<SiteSpec> sites;
  std::string forecasts_path;
  std::string observations_path;  // optional; forecasts may embed scenario=-1 rows
  int n_scenarios = 0;
  double split_fraction = 0.8;
  std::uint64_t seed = 1;

  Hierarchy hierarchy() const;
  void validate() const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// Reads the long-form delimited files named by the manifest, clips every
/// value into [0, capacity] (logging, not rejecting, violations), resamples
/// any series whose per-case scenario count differs from the manifest N by
/// empirical-quantile matching, and validates observation coherence.
ScenarioPanel load_panel(const DatasetManifest& manifest);

/// Writes `issuance_time,lead_time,scenario,series,value_mw` rows; scenarios
/// are numbered 1..N, observation rows (if requested) use scenario -1.
/// Values round-trip exactly through load_panel.
void save_panel(const ScenarioPanel& panel, const std::string& forecasts_path,
                const std::string& observations_path = "");

/// Time-ordered split: the first floor(fraction * n_days) issuance days
/// become the training panel, the rest the test panel. Both sides must be
/// nonempty.
std::pair<ScenarioPanel, ScenarioPanel> chronological_split(const ScenarioPanel& panel,
                                                            double fraction);

/// Synthetic dataset recipe: a spatially correlated latent Gaussian field
/// pushed through a capacity-scaled logistic map gives the truth; base
/// forecasts are drawn from a corrupted copy (latent spread shrunk, marginal
/// power-warped, mean shifted by a capacity fraction) and each agent's
/// aggregate row is an independently drawn corrupted sum, deliberately
/// incoherent with the parts.
struct SyntheticSpec {
  int m = 4;
  int n_scenarios = 16;
  int n_days = 100;
  double correlation_length = 2.0;   // site-index e-folding of the latent field
  double marginal_location = 0.0;
  double marginal_scale = 1.5;
  double bias_fraction = 0.0;        // of capacity, added to base forecasts
  double dispersion_shrink = 1.0;    // (0, 1]; latent spread multiplier
  double warp_exponent = 1.0;        // power warp of the base marginals
  std::vector<double> capacities_mw; // optional; default 60 + 25*i
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<double> effective_capacities() const;
  Hierarchy hierarchy() const;
};

SyntheticSpec synthetic_spec_from_json_file(const std::string& path);

/// Draws fresh joint bottom-level outcomes from the synthetic truth;
/// deterministic given the spec seed.
class TruthSampler {
 public:
  explicit TruthSampler(const SyntheticSpec& spec);
  Eigen::VectorXd draw();  // length m, MW

 private:
  SyntheticSpec spec_;
  Eigen::MatrixXd chol_;
  std::vector<double> capacities_;
  Rng rng_;
};

/// Deterministic synthetic panel with observations, plus a truth sampler
/// for oracle computations.
std::pair<ScenarioPanel, TruthSampler> generate_synthetic(const SyntheticSpec& spec);

}  // namespace windpool
