#pragma once

#include <string>
#include <vector>

#include "windpool/common.hpp"
#include "windpool/data.hpp"
#include "windpool/market.hpp"
#include "windpool/reconcile.hpp"

namespace windpool {

/// One experiment: dataset source, offering method, prices, training knobs,
/// seed, output directory. Every field lands in the run manifest so a run
/// can be replayed exactly.
struct RunConfig {
  std::string manifest_path;        // exactly one of manifest_path /
  std::string synthetic_spec_path;  // synthetic_spec_path must be set
  std::string method = "bottom_up"; // independent | bottom_up | projection | nonparametric
  PriceTriple prices{25.0, 4.0, 12.0};
  TrainConfig training;
  double split_fraction = 0.8;
  double validation_fraction = 0.2;  // carved from the end of the training period
  std::uint64_t seed = 1;
  std::string output_dir;
  std::string checkpoint_path;  // learned methods: written by train, read by run
  int threads = 1;

  void validate() const;
  bool is_cooperative() const { return method != "independent"; }
  bool needs_checkpoint() const { return method == "projection" || method == "nonparametric"; }
};

RunConfig load_run_config(const std::string& path);

/// Loads the configured dataset (manifest or synthetic) and its hierarchy.
std::pair<ScenarioPanel, Hierarchy> load_dataset(const RunConfig& config);

int cmd_generate(const std::string& spec_path, const std::string& out_dir);
int cmd_train(const RunConfig& config);
int cmd_run(const RunConfig& config);
int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);
int cmd_audit(const std::string& run_dir);

}  // namespace windpool
