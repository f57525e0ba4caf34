#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "vilab/fem.hpp"
#include "vilab/linear_solver.hpp"

namespace vilab {

namespace {

using Operator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Largest eigenvalue of a symmetric operator, converged to `rel_tol` in the
// Ritz residual sense.
double lanczos_top(const Operator& op, Eigen::Index n, int max_steps, double rel_tol) {
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  v.normalize();

  const int steps = static_cast<int>(std::min<Eigen::Index>(max_steps, n));
  Eigen::MatrixXd basis(n, steps);
  std::vector<double> alpha, beta;
  double theta = 0.0;
  for (int k = 0; k < steps; ++k) {
    basis.col(k) = v;
    Eigen::VectorXd w = op(v);
    const double a = v.dot(w);
    alpha.push_back(a);
    // Full reorthogonalization, twice.
    for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
    const double b = w.norm();

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) {
      t(i, i) = alpha[i];
      if (i < k) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    theta = es.eigenvalues()(k);
    const double resid = std::abs(b * es.eigenvectors()(k, k));
    if (resid <= rel_tol * std::abs(theta) || b < 1e-300) break;
    beta.push_back(b);
    v = w / b;
  }
  return theta;
}

}  // namespace

double lanczos_max_eigenvalue(const SparseMatrix& k, int steps) {
  return lanczos_top([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(k * x); }, k.rows(), steps, 1e-10);
}

SpectrumReport spectrum_report(const DiscreteObstacleProblem& problem, std::size_t dense_limit) {
  const SparseMatrix& k = problem.stiffness;
  SpectrumReport rep;
  if (static_cast<std::size_t>(k.rows()) <= dense_limit) {
    rep.dense = true;
    const Eigen::MatrixXd dense = Eigen::MatrixXd(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    rep.min_eig = ev.minCoeff();
    rep.max_eig = ev.maxCoeff();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (std::abs(ev[i]) <= 1e-10 * rep.max_eig) ++rep.near_zero;
    rep.positive_definite = rep.min_eig > 0.0 && rep.near_zero == 0;
    return rep;
  }

  rep.max_eig = lanczos_max_eigenvalue(k);
  const Eigen::SparseMatrix<double> kc = k;
  SparseCholesky chol;
  chol.analyze(kc);
  if (chol.factorize(kc)) {
    const double inv_top =
        lanczos_top([&](const Eigen::VectorXd& x) { return chol.solve(x); }, k.rows(), 200, 1e-10);
    rep.min_eig = 1.0 / inv_top;
  } else {
    // Not SPD: the bottom of the spectrum from the shifted operator.
    const double shift = rep.max_eig;
    const double top = lanczos_top(
        [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(shift * x - k * x); }, k.rows(), 400, 1e-10);
    rep.min_eig = shift - top;
  }
  rep.near_zero = std::abs(rep.min_eig) <= 1e-10 * rep.max_eig ? 1 : 0;
  rep.positive_definite = rep.min_eig > 0.0 && rep.near_zero == 0;
  return rep;
}

}  // namespace vilab
