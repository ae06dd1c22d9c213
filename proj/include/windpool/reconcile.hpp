#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "windpool/common.hpp"
#include "windpool/hierarchy.hpp"
#include "windpool/learn.hpp"
#include "windpool/panel.hpp"

namespace windpool {

enum class ReconcilerKind { BottomUp, Projection, Nonparametric };

std::string to_string(ReconcilerKind kind);
ReconcilerKind reconciler_kind_from_string(const std::string& name);

/// Scenario-by-scenario map from a base (m+1)-vector to a coherent one.
/// Every variant routes through aggregate_bottom, so outputs are coherent by
/// construction. Learned variants clip the intermediate bottom forecast to
/// [0, capacity] before aggregation.
class Reconciler {
 public:
  static Reconciler bottom_up(Hierarchy h);
  static Reconciler projection(Hierarchy h, Eigen::MatrixXd q);  // q: m x (m+1)
  static Reconciler nonparametric(Hierarchy h, DenseNetwork net);

  /// Default architecture: two tanh hidden layers of width 4(m+1) and a
  /// fixed residual selecting the base bottom entries; hidden layers get
  /// seeded random weights, output layer starts at zero so the initial map
  /// is exactly bottom-up.
  static Reconciler nonparametric_default(const Hierarchy& h, Rng& rng);

  /// All-zero parameters; equals bottom-up reconciliation exactly.
  static Reconciler nonparametric_zero(const Hierarchy& h);

  /// Q = [0 | I]: discards the base aggregate, keeps the bottom entries.
  static Reconciler projection_identity(const Hierarchy& h);

  ReconcilerKind kind() const { return kind_; }
  const Hierarchy& hierarchy() const { return hierarchy_; }
  const Eigen::MatrixXd& projection_matrix() const;
  const DenseNetwork& network() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& base) const;
  ScenarioPanel apply_panel(const ScenarioPanel& panel) const;

  nlohmann::json to_json() const;
  static Reconciler from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Reconciler load(const std::string& path);

 private:
  Reconciler(ReconcilerKind kind, Hierarchy h) : kind_(kind), hierarchy_(std::move(h)) {}

  ReconcilerKind kind_;
  Hierarchy hierarchy_;
  Eigen::MatrixXd q_;
  DenseNetwork net_;
};

struct TrainConfig {
  int max_epochs = 500;
  int patience = 20;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 10.0;
  int hidden_width_factor = 4;
  int hidden_layers = 2;
  // Glorot multiplier for the hidden layers; small values start the map
  // near-linear, which stabilizes energy-score descent.
  double hidden_init_scale = 1.0;
  std::uint64_t seed = 1;
};

struct TrainingReport {
  std::vector<double> train_aes;       // per epoch (epoch 0 = initial parameters)
  std::vector<double> validation_aes;  // per epoch
  int selected_epoch = 0;              // argmin of validation_aes
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string checkpoint_path;         // set by callers that persist the result
};

/// Trains a projection or nonparametric reconciler by stochastic descent on
/// the average energy score; one batch is the 24 lead-time cases of a single
/// issuance day. Early-stops on validation AES and returns the
/// best-validation parameters (the initial parameters count as epoch 0, so
/// the selection never loses to bottom-up initialization). Throws
/// NumericalError naming epoch and batch on divergence.
std::pair<Reconciler, TrainingReport> train_reconciler(ReconcilerKind kind,
                                                       const ScenarioPanel& train_panel,
                                                       const ScenarioPanel& validation_panel,
                                                       const Hierarchy& hierarchy,
                                                       const TrainConfig& config);

}  // namespace windpool
