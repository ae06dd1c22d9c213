#include "windpool/learn.hpp"

#include <cmath>

namespace windpool {

namespace {

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ConfigError("network needs input and output sizes");
  for (int s : sizes) {
    if (s < 1) throw ConfigError("network layer sizes must be positive");
  }
}

void check_residual(const Eigen::MatrixXd& residual, const std::vector<int>& sizes) {
  if (residual.size() == 0) return;
  if (residual.rows() != sizes.back() || residual.cols() != sizes.front()) {
    throw ConfigError("residual map must be d_out x d_in");
  }
}

}  // namespace

DenseNetwork DenseNetwork::zeros(const std::vector<int>& sizes, Eigen::MatrixXd residual) {
  check_sizes(sizes);
  check_residual(residual, sizes);
  DenseNetwork net;
  net.sizes = sizes;
  net.residual = std::move(residual);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    net.w.push_back(Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]));
    net.b.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  return net;
}

DenseNetwork DenseNetwork::randomized(const std::vector<int>& sizes, Eigen::MatrixXd residual,
                                      Rng& rng) {
  DenseNetwork net = zeros(sizes, std::move(residual));
  // All layers but the last get Glorot-uniform weights; the zero output
  // layer keeps the initial map equal to the residual.
  for (int l = 0; l + 1 < net.n_layers(); ++l) {
    const double bound = std::sqrt(6.0 / (net.sizes[l] + net.sizes[l + 1]));
    for (Eigen::Index r = 0; r < net.w[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.w[l].cols(); ++c) {
        net.w[l](r, c) = bound * (2.0 * uniform01(rng) - 1.0);
      }
    }
  }
  return net;
}

long long DenseNetwork::n_params() const {
  long long n = 0;
  for (int l = 0; l < n_layers(); ++l) n += w[l].size() + b[l].size();
  return n;
}

Eigen::VectorXd DenseNetwork::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x.transpose()).row(0).transpose();
}

Eigen::MatrixXd DenseNetwork::forward_batch(const Eigen::MatrixXd& x, ForwardCache* cache) const {
  if (x.cols() != d_in()) throw ConfigError("input width does not match the network");
  if (!x.allFinite()) throw ConfigError("network input must be finite");
  if (cache) {
    cache->input = x;
    cache->activations.clear();
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Eigen::MatrixXd pre = (h * w[l].transpose()).rowwise() + b[l].transpose();
    if (l + 1 < n_layers()) {
      h = pre.array().tanh().matrix();
      if (cache) cache->activations.push_back(h);
    } else {
      h = std::move(pre);
    }
  }
  if (has_residual()) h += x * residual.transpose();
  return h;
}

void DenseNetwork::Gradients::add_scaled(const Gradients& other, double scale) {
  for (std::size_t l = 0; l < dw.size(); ++l) {
    dw[l] += scale * other.dw[l];
    db[l] += scale * other.db[l];
  }
}

void DenseNetwork::Gradients::scale(double s) {
  for (std::size_t l = 0; l < dw.size(); ++l) {
    dw[l] *= s;
    db[l] *= s;
  }
}

DenseNetwork::Gradients DenseNetwork::zero_gradients() const {
  Gradients g;
  for (int l = 0; l < n_layers(); ++l) {
    g.dw.push_back(Eigen::MatrixXd::Zero(w[l].rows(), w[l].cols()));
    g.db.push_back(Eigen::VectorXd::Zero(b[l].size()));
  }
  return g;
}

DenseNetwork::Gradients DenseNetwork::backward(const ForwardCache& cache,
                                               const Eigen::MatrixXd& upstream) const {
  const int layers = n_layers();
  if (upstream.cols() != d_out() || upstream.rows() != cache.input.rows()) {
    throw ConfigError("upstream gradient shape does not match the forward batch");
  }
  Gradients g = zero_gradients();
  Eigen::MatrixXd delta = upstream;  // gradient at layer output (pre-activation for hidden)
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& below = (l == 0) ? cache.input : cache.activations[l - 1];
    g.dw[l] = delta.transpose() * below;
    g.db[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      // through the tanh of layer l-1: act' = 1 - act^2
      const Eigen::MatrixXd& act = cache.activations[l - 1];
      delta = ((delta * w[l]).array() * (1.0 - act.array().square())).matrix();
    }
  }
  return g;
}

Eigen::VectorXd DenseNetwork::flatten_params() const {
  Eigen::VectorXd flat(n_params());
  Eigen::Index at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    flat.segment(at, w[l].size()) = Eigen::Map<const Eigen::VectorXd>(w[l].data(), w[l].size());
    at += w[l].size();
    flat.segment(at, b[l].size()) = b[l];
    at += b[l].size();
  }
  return flat;
}

void DenseNetwork::set_params(const Eigen::VectorXd& flat) {
  if (flat.size() != n_params()) throw ConfigError("parameter vector has wrong length");
  Eigen::Index at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    Eigen::Map<Eigen::VectorXd>(w[l].data(), w[l].size()) = flat.segment(at, w[l].size());
    at += w[l].size();
    b[l] = flat.segment(at, b[l].size());
    at += b[l].size();
  }
}

Eigen::VectorXd DenseNetwork::flatten_gradients(const Gradients& g) const {
  Eigen::VectorXd flat(n_params());
  Eigen::Index at = 0;
  for (int l = 0; l < n_layers(); ++l) {
    flat.segment(at, g.dw[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(g.dw[l].data(), g.dw[l].size());
    at += g.dw[l].size();
    flat.segment(at, g.db[l].size()) = g.db[l];
    at += g.db[l].size();
  }
  return flat;
}

nlohmann::json DenseNetwork::to_json() const {
  nlohmann::json j;
  j["format"] = 1;
  j["sizes"] = sizes;
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (int l = 0; l < n_layers(); ++l) {
    std::vector<double> wf(w[l].data(), w[l].data() + w[l].size());
    std::vector<double> bf(b[l].data(), b[l].data() + b[l].size());
    j["weights"].push_back(wf);
    j["biases"].push_back(bf);
  }
  if (has_residual()) {
    j["residual"] = std::vector<double>(residual.data(), residual.data() + residual.size());
  }
  return j;
}

DenseNetwork DenseNetwork::from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format").get<int>() != 1) {
    throw ConfigError("unsupported network checkpoint format");
  }
  std::vector<int> sizes = j.at("sizes").get<std::vector<int>>();
  DenseNetwork net = zeros(sizes);
  for (int l = 0; l < net.n_layers(); ++l) {
    auto wf = j.at("weights").at(l).get<std::vector<double>>();
    auto bf = j.at("biases").at(l).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(wf.size()) != net.w[l].size() ||
        static_cast<Eigen::Index>(bf.size()) != net.b[l].size()) {
      throw ConfigError("network checkpoint layer size mismatch");
    }
    net.w[l] = Eigen::Map<const Eigen::MatrixXd>(wf.data(), net.w[l].rows(), net.w[l].cols());
    net.b[l] = Eigen::Map<const Eigen::VectorXd>(bf.data(), net.b[l].size());
  }
  if (j.contains("residual")) {
    auto rf = j.at("residual").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(rf.size()) != static_cast<Eigen::Index>(sizes.back()) * sizes.front()) {
      throw ConfigError("network checkpoint residual size mismatch");
    }
    net.residual = Eigen::Map<const Eigen::MatrixXd>(rf.data(), sizes.back(), sizes.front());
  }
  return net;
}

Eigen::VectorXd clip_global_norm(Eigen::VectorXd grad, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ConfigError("clip threshold must be positive");
  const double norm = grad.norm();
  if (norm > clip_norm) grad *= clip_norm / norm;
  return grad;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state) {
  if (grad.size() != params.size()) throw ConfigError("gradient length does not match parameters");
  if (!grad.allFinite()) throw NumericalError("non-finite gradient in optimizer step");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step_count = 0;
  }
  const Eigen::VectorXd g = clip_global_norm(grad, state.clip_norm);
  ++state.step_count;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params -= (state.learning_rate * (state.m / bc1).array() /
             ((state.v / bc2).array().sqrt() + state.epsilon))
                .matrix();
}

GradientCheckReport check_gradients(const DenseNetwork& net, const LossFn& loss, int n_trials,
                                    double tol, Rng& rng) {
  GradientCheckReport report;
  report.n_trials = n_trials;
  DenseNetwork probe = net;
  const double step = 1e-6;
  for (int trial = 0; trial < n_trials; ++trial) {
    Eigen::VectorXd x(net.d_in());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal01(rng);

    DenseNetwork::ForwardCache cache;
    Eigen::MatrixXd out = probe.forward_batch(x.transpose(), &cache);
    auto [loss0, dout] = loss(out.row(0).transpose());
    (void)loss0;
    Eigen::VectorXd analytic =
        probe.flatten_gradients(probe.backward(cache, dout.transpose()));

    Eigen::VectorXd params = probe.flatten_params();
    for (Eigen::Index pidx = 0; pidx < params.size(); ++pidx) {
      const double saved = params[pidx];
      params[pidx] = saved + step;
      probe.set_params(params);
      const double up = loss(probe.forward(x)).first;
      params[pidx] = saved - step;
      probe.set_params(params);
      const double down = loss(probe.forward(x)).first;
      params[pidx] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double rel = std::abs(analytic[pidx] - numeric) /
                         std::max({1.0, std::abs(analytic[pidx]), std::abs(numeric)});
      report.max_relative_error = std::max(report.max_relative_error, rel);
    }
    probe.set_params(params);
  }
  report.pass = report.max_relative_error <= tol;
  return report;
}

}  // namespace windpool
