#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>

namespace vilab {

/// Sparse Cholesky factorization with a reusable symbolic phase. Backed by
/// CHOLMOD's supernodal LL^T when available, Eigen's simplicial LL^T otherwise.
class SparseCholesky {
 public:
  SparseCholesky();
  ~SparseCholesky();
  SparseCholesky(SparseCholesky&&) noexcept;
  SparseCholesky& operator=(SparseCholesky&&) noexcept;

  /// Symbolic analysis. The pattern must stay fixed for later factorize().
  void analyze(const Eigen::SparseMatrix<double>& a);
  /// Numeric factorization; false if the matrix is not positive definite.
  bool factorize(const Eigen::SparseMatrix<double>& a);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  static const char* backend();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vilab
