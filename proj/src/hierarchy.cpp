#include "windpool/hierarchy.hpp"

#include <cmath>

namespace windpool {

Hierarchy::Hierarchy(std::vector<double> capacities_mw) : capacities_(std::move(capacities_mw)) {
  if (capacities_.empty()) throw ConfigError("hierarchy needs at least one producer");
  double total = 0.0;
  for (std::size_t i = 0; i < capacities_.size(); ++i) {
    double c = capacities_[i];
    if (!std::isfinite(c) || c <= 0.0) {
      throw ConfigError("capacity of producer " + std::to_string(i + 1) + " must be positive");
    }
    total += c;
  }
  total_capacity_ = total;
}

std::uint64_t Hierarchy::fingerprint() const {
  std::string repr = "hierarchy:m=" + std::to_string(m());
  for (double c : capacities_) {
    repr += ':';
    repr += format_double(c);
  }
  return fnv1a64(repr);
}

Eigen::MatrixXd structure_matrix(const Hierarchy& h) {
  const int m = h.m();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m + 1, m);
  g.row(0).setOnes();
  g.bottomRows(m).setIdentity();
  return g;
}

double sequential_sum(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
  return s;
}

bool is_coherent(const Eigen::VectorXd& v, double tol) {
  if (v.size() < 2) throw ConfigError("coherence needs an aggregate and at least one producer");
  if (tol < 0.0) throw ConfigError("coherence tolerance must be nonnegative");
  return std::abs(v[0] - sequential_sum(v.tail(v.size() - 1))) <= tol;
}

Eigen::VectorXd aggregate_bottom(const Eigen::VectorXd& b) {
  if (b.size() < 1) throw ConfigError("aggregate_bottom needs at least one value");
  Eigen::VectorXd out(b.size() + 1);
  out[0] = sequential_sum(b);
  out.tail(b.size()) = b;
  return out;
}

}  // namespace windpool
