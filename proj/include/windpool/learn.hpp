#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "windpool/common.hpp"
#include "json.hpp"

namespace windpool {

/// Feed-forward network with tanh hidden layers, linear output, and an
/// optional fixed (non-trainable) residual map added to the output.
/// Inputs and outputs are dimensionless; callers own any unit scaling.
struct DenseNetwork {
  std::vector<int> sizes;          // [d_in, hidden..., d_out]
  std::vector<Eigen::MatrixXd> w;  // layer l: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> b;
  Eigen::MatrixXd residual;        // d_out x d_in, 0x0 when absent

  static DenseNetwork zeros(const std::vector<int>& sizes, Eigen::MatrixXd residual = {});

  /// Glorot-uniform hidden layers, zero output layer: the initial map equals
  /// the residual alone while gradients still reach every layer.
  static DenseNetwork randomized(const std::vector<int>& sizes, Eigen::MatrixXd residual,
                                 Rng& rng);

  bool has_residual() const { return residual.size() > 0; }
  int n_layers() const { return static_cast<int>(w.size()); }
  int d_in() const { return sizes.front(); }
  int d_out() const { return sizes.back(); }
  long long n_params() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  struct ForwardCache {
    Eigen::MatrixXd input;                    // B x d_in
    std::vector<Eigen::MatrixXd> activations; // post-nonlinearity, B x width
  };

  /// Row-per-sample batched forward; fills the cache when given.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, ForwardCache* cache = nullptr) const;

  struct Gradients {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;

    void add_scaled(const Gradients& other, double scale);
    void scale(double s);
  };

  Gradients zero_gradients() const;

  /// Reverse-mode gradients of sum_rows(upstream . output) w.r.t. all
  /// parameters; upstream is B x d_out.
  Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const;

  Eigen::VectorXd flatten_params() const;
  void set_params(const Eigen::VectorXd& flat);
  Eigen::VectorXd flatten_gradients(const Gradients& g) const;

  nlohmann::json to_json() const;
  static DenseNetwork from_json(const nlohmann::json& j);
};

/// Adam with bias correction; gradients are clipped to global L2 norm
/// <= clip_norm before the moment update.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 10.0;
  long long step_count = 0;
  Eigen::VectorXd m;  // sized on first step
  Eigen::VectorXd v;
};

/// Clips to global norm; returns the possibly-shortened gradient.
Eigen::VectorXd clip_global_norm(Eigen::VectorXd grad, double clip_norm);

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  int n_trials = 0;
  bool pass = false;
};

/// Loss on the network output; returns (loss, dloss/doutput).
using LossFn = std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;

/// Compares backward() against central finite differences (step 1e-6) on
/// n_trials random inputs, probing every parameter.
GradientCheckReport check_gradients(const DenseNetwork& net, const LossFn& loss, int n_trials,
                                    double tol, Rng& rng);

}  // namespace windpool
