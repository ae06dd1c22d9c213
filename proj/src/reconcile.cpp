#include "windpool/reconcile.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "windpool/scoring.hpp"

namespace windpool {

std::string to_string(ReconcilerKind kind) {
  switch (kind) {
    case ReconcilerKind::BottomUp: return "bottom_up";
    case ReconcilerKind::Projection: return "projection";
    case ReconcilerKind::Nonparametric: return "nonparametric";
  }
  throw ConfigError("unknown reconciler kind");
}

ReconcilerKind reconciler_kind_from_string(const std::string& name) {
  if (name == "bottom_up") return ReconcilerKind::BottomUp;
  if (name == "projection") return ReconcilerKind::Projection;
  if (name == "nonparametric") return ReconcilerKind::Nonparametric;
  throw ConfigError("unknown reconciler kind '" + name + "'");
}

Reconciler Reconciler::bottom_up(Hierarchy h) {
  return Reconciler(ReconcilerKind::BottomUp, std::move(h));
}

Reconciler Reconciler::projection(Hierarchy h, Eigen::MatrixXd q) {
  if (q.rows() != h.m() || q.cols() != h.m() + 1) {
    throw ConfigError("projection matrix must be m x (m+1)");
  }
  Reconciler r(ReconcilerKind::Projection, std::move(h));
  r.q_ = std::move(q);
  return r;
}

Reconciler Reconciler::nonparametric(Hierarchy h, DenseNetwork net) {
  if (net.d_in() != h.m() + 1 || net.d_out() != h.m()) {
    throw ConfigError("reconciler network must map m+1 inputs to m outputs");
  }
  Reconciler r(ReconcilerKind::Nonparametric, std::move(h));
  r.net_ = std::move(net);
  return r;
}

namespace {

Eigen::MatrixXd bottom_selector(int m) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m + 1);
  r.rightCols(m).setIdentity();
  return r;
}

std::vector<int> default_sizes(int m, int width_factor, int hidden_layers) {
  std::vector<int> sizes;
  sizes.push_back(m + 1);
  for (int l = 0; l < hidden_layers; ++l) sizes.push_back(width_factor * (m + 1));
  sizes.push_back(m);
  return sizes;
}

}  // namespace

Reconciler Reconciler::nonparametric_default(const Hierarchy& h, Rng& rng) {
  DenseNetwork net = DenseNetwork::randomized(default_sizes(h.m(), 4, 2), bottom_selector(h.m()), rng);
  return nonparametric(h, std::move(net));
}

Reconciler Reconciler::nonparametric_zero(const Hierarchy& h) {
  DenseNetwork net = DenseNetwork::zeros(default_sizes(h.m(), 4, 2), bottom_selector(h.m()));
  return nonparametric(h, std::move(net));
}

Reconciler Reconciler::projection_identity(const Hierarchy& h) {
  return projection(h, bottom_selector(h.m()));
}

const Eigen::MatrixXd& Reconciler::projection_matrix() const {
  if (kind_ != ReconcilerKind::Projection) throw ConfigError("not a projection reconciler");
  return q_;
}

const DenseNetwork& Reconciler::network() const {
  if (kind_ != ReconcilerKind::Nonparametric) throw ConfigError("not a nonparametric reconciler");
  return net_;
}

Eigen::VectorXd Reconciler::apply(const Eigen::VectorXd& base) const {
  const int m = hierarchy_.m();
  if (base.size() != m + 1) throw ConfigError("base scenario vector must have length m+1");
  if (!base.allFinite()) throw ConfigError("base scenario vector must be finite");

  switch (kind_) {
    case ReconcilerKind::BottomUp:
      return aggregate_bottom(base.tail(m));
    case ReconcilerKind::Projection: {
      Eigen::VectorXd h = q_ * base;
      for (int i = 0; i < m; ++i) h[i] = std::clamp(h[i], 0.0, hierarchy_.capacity(i));
      return aggregate_bottom(h);
    }
    case ReconcilerKind::Nonparametric: {
      Eigen::VectorXd xn(m + 1);
      xn[0] = base[0] / hierarchy_.total_capacity();
      for (int i = 0; i < m; ++i) xn[i + 1] = base[i + 1] / hierarchy_.capacity(i);
      Eigen::VectorXd out = net_.forward(xn);
      Eigen::VectorXd h(m);
      for (int i = 0; i < m; ++i) {
        h[i] = std::clamp(out[i] * hierarchy_.capacity(i), 0.0, hierarchy_.capacity(i));
      }
      return aggregate_bottom(h);
    }
  }
  throw ConfigError("unknown reconciler kind");
}

ScenarioPanel Reconciler::apply_panel(const ScenarioPanel& panel) const {
  if (panel.n_producers() != hierarchy_.m()) {
    throw ConfigError("panel producer count does not match the reconciler hierarchy");
  }
  ScenarioPanel out = panel;  // observations carried through untouched
  for (int t = 0; t < panel.n_issuance(); ++t) {
    for (int k = 0; k < panel.n_leads(); ++k) {
      for (int xi = 0; xi < panel.n_scenarios; ++xi) {
        Eigen::VectorXd mapped = apply(panel.scenario_vector(t, k, xi));
        for (int s = 0; s < panel.n_series(); ++s) out.value(t, k, xi, s) = mapped[s];
      }
    }
  }
  return out;
}

nlohmann::json Reconciler::to_json() const {
  nlohmann::json j;
  j["format"] = 1;
  j["kind"] = to_string(kind_);
  j["capacities_mw"] = hierarchy_.capacities();
  j["hierarchy_fingerprint"] = hierarchy_.fingerprint();
  if (kind_ == ReconcilerKind::Projection) {
    j["q"] = std::vector<double>(q_.data(), q_.data() + q_.size());
  } else if (kind_ == ReconcilerKind::Nonparametric) {
    j["network"] = net_.to_json();
  }
  return j;
}

Reconciler Reconciler::from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format").get<int>() != 1) {
    throw ConfigError("unsupported reconciler checkpoint format");
  }
  Hierarchy h(j.at("capacities_mw").get<std::vector<double>>());
  const auto fingerprint = j.at("hierarchy_fingerprint").get<std::uint64_t>();
  if (fingerprint != h.fingerprint()) {
    throw ConfigError("reconciler checkpoint hierarchy fingerprint mismatch");
  }
  const ReconcilerKind kind = reconciler_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case ReconcilerKind::BottomUp:
      return bottom_up(std::move(h));
    case ReconcilerKind::Projection: {
      auto qf = j.at("q").get<std::vector<double>>();
      const int m = h.m();
      if (static_cast<int>(qf.size()) != m * (m + 1)) {
        throw ConfigError("projection checkpoint has wrong matrix size");
      }
      Eigen::MatrixXd q = Eigen::Map<const Eigen::MatrixXd>(qf.data(), m, m + 1);
      return projection(std::move(h), std::move(q));
    }
    case ReconcilerKind::Nonparametric:
      return nonparametric(std::move(h), DenseNetwork::from_json(j.at("network")));
  }
  throw ConfigError("unknown reconciler kind");
}

void Reconciler::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write reconciler checkpoint to " + path);
  out << to_json().dump(2) << '\n';
}

Reconciler Reconciler::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read reconciler checkpoint from " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

namespace {

/// Checks the hierarchy matches and observations exist; used by training.
void check_training_panel(const ScenarioPanel& panel, const Hierarchy& h, const char* label) {
  panel.validate();
  if (!panel.has_observations()) {
    throw ConfigError(std::string(label) + " panel needs observations for training");
  }
  if (panel.n_producers() != h.m()) {
    throw ConfigError(std::string(label) + " panel producer count does not match the hierarchy");
  }
}

/// Mutable view of the parameters being trained, for either variant.
struct TrainableModel {
  ReconcilerKind kind;
  const Hierarchy* hierarchy;
  Eigen::MatrixXd q;  // projection
  DenseNetwork net;   // nonparametric

  Reconciler to_reconciler() const {
    if (kind == ReconcilerKind::Projection) return Reconciler::projection(*hierarchy, q);
    return Reconciler::nonparametric(*hierarchy, net);
  }

  Eigen::VectorXd flatten() const {
    if (kind == ReconcilerKind::Projection) {
      return Eigen::Map<const Eigen::VectorXd>(q.data(), q.size());
    }
    return net.flatten_params();
  }

  void set_flat(const Eigen::VectorXd& flat) {
    if (kind == ReconcilerKind::Projection) {
      Eigen::Map<Eigen::VectorXd>(q.data(), q.size()) = flat;
    } else {
      net.set_params(flat);
    }
  }
};

/// Energy-score loss and parameter gradient of one (issuance, lead) case.
/// Forward pass mirrors Reconciler::apply, including the clip to
/// [0, capacity] whose subgradient zeroes clipped coordinates.
double case_loss_and_grad(TrainableModel& model, const Eigen::MatrixXd& base_scenarios,
                          const Eigen::VectorXd& observation, Eigen::VectorXd* flat_grad) {
  const Hierarchy& hier = *model.hierarchy;
  const int m = hier.m();
  const int n = static_cast<int>(base_scenarios.rows());

  // Map all N scenarios through the bottom-level model in one batch.
  Eigen::MatrixXd inputs = base_scenarios;  // N x (m+1)
  if (model.kind == ReconcilerKind::Nonparametric) {
    inputs.col(0) /= hier.total_capacity();
    for (int i = 0; i < m; ++i) inputs.col(i + 1) /= hier.capacity(i);
  }

  DenseNetwork::ForwardCache cache;
  Eigen::MatrixXd raw_bottom;  // N x m, pre-clip, in MW
  if (model.kind == ReconcilerKind::Projection) {
    raw_bottom = inputs * model.q.transpose();
  } else {
    Eigen::MatrixXd out = model.net.forward_batch(inputs, &cache);
    raw_bottom = out;
    for (int i = 0; i < m; ++i) raw_bottom.col(i) *= hier.capacity(i);
  }

  Eigen::MatrixXd reconciled(n, m + 1);
  Eigen::MatrixXd clip_mask = Eigen::MatrixXd::Ones(n, m);
  for (int xi = 0; xi < n; ++xi) {
    Eigen::VectorXd h(m);
    for (int i = 0; i < m; ++i) {
      double v = raw_bottom(xi, i);
      if (v < 0.0) {
        v = 0.0;
        clip_mask(xi, i) = 0.0;
      } else if (v > hier.capacity(i)) {
        v = hier.capacity(i);
        clip_mask(xi, i) = 0.0;
      }
      h[i] = v;
    }
    reconciled.row(xi) = aggregate_bottom(h).transpose();
  }

  EnergyScoreResult score = energy_score(reconciled, observation);
  if (!flat_grad) return score.value;

  Eigen::MatrixXd g_full = energy_score_subgradient(reconciled, observation);  // N x (m+1)
  // Through the structure matrix: dLoss/dh_i = g_aggregate + g_i.
  Eigen::MatrixXd g_bottom(n, m);
  for (int i = 0; i < m; ++i) g_bottom.col(i) = g_full.col(0) + g_full.col(i + 1);
  g_bottom.array() *= clip_mask.array();

  if (model.kind == ReconcilerKind::Projection) {
    Eigen::MatrixXd gq = g_bottom.transpose() * inputs;  // m x (m+1)
    *flat_grad = Eigen::Map<const Eigen::VectorXd>(gq.data(), gq.size());
  } else {
    for (int i = 0; i < m; ++i) g_bottom.col(i) *= hier.capacity(i);  // de-normalization
    DenseNetwork::Gradients g = model.net.backward(cache, g_bottom);
    *flat_grad = model.net.flatten_gradients(g);
  }
  return score.value;
}

double validation_aes(const TrainableModel& model, const ScenarioPanel& panel) {
  Reconciler r = model.to_reconciler();
  return average_energy_score(r.apply_panel(panel));
}

}  // namespace

std::pair<Reconciler, TrainingReport> train_reconciler(ReconcilerKind kind,
                                                       const ScenarioPanel& train_panel,
                                                       const ScenarioPanel& validation_panel,
                                                       const Hierarchy& hierarchy,
                                                       const TrainConfig& config) {
  if (kind == ReconcilerKind::BottomUp) {
    throw ConfigError("bottom_up has no parameters to train");
  }
  check_training_panel(train_panel, hierarchy, "training");
  check_training_panel(validation_panel, hierarchy, "validation");
  if (config.max_epochs < 1 || config.patience < 1) {
    throw ConfigError("training needs positive epoch and patience counts");
  }

  const auto started = std::chrono::steady_clock::now();
  Rng rng(mix_seed(config.seed, 0x7241u));

  TrainableModel model;
  model.kind = kind;
  model.hierarchy = &hierarchy;
  const int m = hierarchy.m();
  if (kind == ReconcilerKind::Projection) {
    model.q = bottom_selector(m);
  } else {
    model.net = DenseNetwork::randomized(
        default_sizes(m, config.hidden_width_factor, config.hidden_layers), bottom_selector(m),
        rng);
    if (config.hidden_init_scale != 1.0) {
      for (int l = 0; l + 1 < model.net.n_layers(); ++l) {
        model.net.w[l] *= config.hidden_init_scale;
      }
    }
  }

  AdamState opt;
  opt.learning_rate = config.learning_rate;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  opt.epsilon = config.epsilon;
  opt.clip_norm = config.clip_norm;

  TrainingReport report;
  report.seed = config.seed;
  report.train_aes.push_back(average_energy_score(model.to_reconciler().apply_panel(train_panel)));
  report.validation_aes.push_back(validation_aes(model, validation_panel));

  Eigen::VectorXd params = model.flatten();
  Eigen::VectorXd best_params = params;
  double best_val = report.validation_aes[0];
  int best_epoch = 0;
  int since_best = 0;

  std::vector<int> day_order(train_panel.n_issuance());
  std::iota(day_order.begin(), day_order.end(), 0);
  const int n_leads = train_panel.n_leads();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // Fisher-Yates with the run generator; one batch per issuance day.
    for (int i = static_cast<int>(day_order.size()) - 1; i > 0; --i) {
      std::swap(day_order[i], day_order[uniform_int(rng, 0, i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t bi = 0; bi < day_order.size(); ++bi) {
      const int t = day_order[bi];
      Eigen::VectorXd batch_grad = Eigen::VectorXd::Zero(params.size());
      double batch_loss = 0.0;
      for (int k = 0; k < n_leads; ++k) {
        Eigen::VectorXd case_grad;
        batch_loss += case_loss_and_grad(model, train_panel.scenario_matrix(t, k),
                                         train_panel.observation_vector(t, k), &case_grad);
        batch_grad += case_grad;
      }
      batch_loss /= n_leads;
      batch_grad /= n_leads;
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(bi + 1));
      }
      adam_step(params, batch_grad, opt);
      model.set_flat(params);
      epoch_loss += batch_loss;
    }
    report.train_aes.push_back(epoch_loss / static_cast<double>(day_order.size()));

    const double val = validation_aes(model, validation_panel);
    report.validation_aes.push_back(val);
    if (val < best_val) {
      best_val = val;
      best_params = params;
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= config.patience) break;
    }
  }

  model.set_flat(best_params);
  report.selected_epoch = best_epoch;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {model.to_reconciler(), report};
}

}  // namespace windpool
