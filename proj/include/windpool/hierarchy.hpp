#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "windpool/common.hpp"

namespace windpool {

/// Two-level aggregation structure: one aggregate series on top of m
/// producers. Vectors that span the hierarchy are ordered
/// [aggregate, producer 1, ..., producer m] everywhere.
class Hierarchy {
 public:
  explicit Hierarchy(std::vector<double> capacities_mw);

  int m() const { return static_cast<int>(capacities_.size()); }
  const std::vector<double>& capacities() const { return capacities_; }
  double capacity(int producer) const { return capacities_.at(producer); }
  double total_capacity() const { return total_capacity_; }

  /// Stable identity of (m, capacities); checkpoints refuse to load across
  /// mismatched hierarchies.
  std::uint64_t fingerprint() const;

 private:
  std::vector<double> capacities_;
  double total_capacity_ = 0.0;
};

/// The (m+1) x m matrix stacking a row of ones over the identity.
Eigen::MatrixXd structure_matrix(const Hierarchy& h);

/// True iff |v[0] - sum(v[1..m])| <= tol. Summation is sequential
/// left-to-right, matching aggregate_bottom, so constructed vectors pass
/// at tol 0.
bool is_coherent(const Eigen::VectorXd& v, double tol);

/// Maps bottom-level values through the structure matrix: result[0] is the
/// sequential sum of b, result[1..m] = b. Coherent by construction.
Eigen::VectorXd aggregate_bottom(const Eigen::VectorXd& b);

/// Sequential left-to-right sum; the one summation order used for every
/// coherence-sensitive aggregate in the library.
double sequential_sum(const Eigen::VectorXd& v);

}  // namespace windpool
