#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "vilab/fem.hpp"

namespace vilab {

struct PdasState {
  Eigen::VectorXd u;
  /// K u - l on the active set, zero elsewhere.
  Eigen::VectorXd lambda;
  /// Sorted active indices.
  std::vector<int> active;
  int iteration = 0;
  double c_param = 1.0;
  /// max |(u_i - psi_i) lambda_i|
  double complementarity = 0.0;
};

struct PdasOptions {
  double c_param = 1.0;
  /// Starting active set; empty start if unset.
  std::optional<std::vector<int>> initial_active;
  bool verbose = false;
};

/// Primal-dual active set method for min 1/2 u'Ku - l'u subject to u >= psi.
/// Stops when the active set repeats; `tol` is relative to ||l||.
PdasState pdas_solve(const DiscreteObstacleProblem& problem, double tol = 1e-10, int max_iter = 100,
                     const PdasOptions& options = {});

/// Dense-matrix variant, used by the abstract engine. Only indices with
/// `constrained[i]` carry the bound.
PdasState pdas_solve_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& l, const Eigen::VectorXd& psi,
                           const std::vector<char>& constrained, double tol, int max_iter,
                           const PdasOptions& options = {});

/// Solves K u = rhs on the complement of the fixed indices with u fixed to
/// the given values there. K must be SPD on the complement.
Eigen::VectorXd solve_reduced_system(const SparseMatrix& k, const Eigen::VectorXd& rhs,
                                     const std::vector<std::pair<int, double>>& fixed);

/// Reusable solver for K restricted to varying free sets. The sparsity
/// pattern of K is kept, so the symbolic factorization is done once.
class ReducedSolver {
 public:
  explicit ReducedSolver(const SparseMatrix& k);
  ~ReducedSolver();

  /// Throws DefinitenessError if K is not SPD on the free set.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const std::vector<char>& is_fixed,
                        const Eigen::VectorXd& fixed_values);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vilab
