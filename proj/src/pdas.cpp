#include "vilab/pdas.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "vilab/errors.hpp"
#include "vilab/linear_solver.hpp"

namespace vilab {

struct ReducedSolver::Impl {
  Eigen::SparseMatrix<double> m;  // pattern of K plus the diagonal
  std::vector<double> values;     // values of K on that pattern
  std::vector<int> rows, cols;
  SparseCholesky chol;
  SparseMatrix k;
};

ReducedSolver::ReducedSolver(const SparseMatrix& k) : impl_(std::make_unique<Impl>()) {
  if (k.rows() != k.cols()) throw PreconditionError("ReducedSolver: matrix must be square");
  auto& d = *impl_;
  d.k = k;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(k.nonZeros() + k.rows()));
  for (Eigen::Index i = 0; i < k.rows(); ++i) trip.emplace_back(i, i, 0.0);
  for (Eigen::Index r = 0; r < k.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(k, r); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  d.m.resize(k.rows(), k.cols());
  d.m.setFromTriplets(trip.begin(), trip.end());
  d.m.makeCompressed();
  const auto nnz = static_cast<std::size_t>(d.m.nonZeros());
  d.values.assign(d.m.valuePtr(), d.m.valuePtr() + nnz);
  d.rows.resize(nnz);
  d.cols.resize(nnz);
  for (Eigen::Index c = 0; c < d.m.outerSize(); ++c)
    for (Eigen::Index p = d.m.outerIndexPtr()[c]; p < d.m.outerIndexPtr()[c + 1]; ++p) {
      d.rows[p] = d.m.innerIndexPtr()[p];
      d.cols[p] = static_cast<int>(c);
    }
  d.chol.analyze(d.m);
}

ReducedSolver::~ReducedSolver() = default;

Eigen::VectorXd ReducedSolver::solve(const Eigen::VectorXd& rhs, const std::vector<char>& is_fixed,
                                     const Eigen::VectorXd& fixed_values) {
  auto& d = *impl_;
  const Eigen::Index n = d.m.rows();
  if (rhs.size() != n || static_cast<Eigen::Index>(is_fixed.size()) != n || fixed_values.size() != n)
    throw PreconditionError("ReducedSolver::solve: size mismatch");

  // Fixed rows and columns become identity rows; the pattern is unchanged.
  double* val = d.m.valuePtr();
  for (std::size_t p = 0; p < d.values.size(); ++p) {
    const int r = d.rows[p], c = d.cols[p];
    val[p] = (is_fixed[r] || is_fixed[c]) ? (r == c ? 1.0 : 0.0) : d.values[p];
  }
  Eigen::VectorXd xfix = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (is_fixed[i]) xfix[i] = fixed_values[i];
  Eigen::VectorXd b = rhs - d.k * xfix;
  for (Eigen::Index i = 0; i < n; ++i)
    if (is_fixed[i]) b[i] = fixed_values[i];

  if (!d.chol.factorize(d.m)) throw DefinitenessError("reduced system is not positive definite");
  Eigen::VectorXd x = d.chol.solve(b);
  const double bnorm = b.norm();
  for (int step = 0; step < 3; ++step) {
    const Eigen::VectorXd r = b - d.m * x;
    if (r.norm() <= 1e-14 * bnorm) break;
    x += d.chol.solve(r);
  }
  // Numerically singular pivots can slip through the factorization.
  const double res = (b - d.m * x).norm();
  if (!x.allFinite() || res > 1e-8 * std::max(bnorm, 1e-300))
    throw DefinitenessError("reduced system is numerically singular");
  return x;
}

Eigen::VectorXd solve_reduced_system(const SparseMatrix& k, const Eigen::VectorXd& rhs,
                                     const std::vector<std::pair<int, double>>& fixed) {
  const Eigen::Index n = k.rows();
  std::vector<char> is_fixed(n, 0);
  Eigen::VectorXd vals = Eigen::VectorXd::Zero(n);
  for (const auto& [i, v] : fixed) {
    if (i < 0 || i >= n) throw PreconditionError("solve_reduced_system: fixed index out of range");
    is_fixed[i] = 1;
    vals[i] = v;
  }
  ReducedSolver solver(k);
  return solver.solve(rhs, is_fixed, vals);
}

namespace {

// Shared iteration; `solve` returns u for a given active mask.
template <class Solve, class Apply>
PdasState pdas_loop(Eigen::Index n, const Eigen::VectorXd& l, const Eigen::VectorXd& psi,
                    const std::vector<char>& constrained, double tol, int max_iter, const PdasOptions& opt,
                    Solve&& solve, Apply&& apply) {
  if (!(tol > 0.0)) throw PreconditionError("pdas: tol must be positive");
  if (max_iter < 1) throw PreconditionError("pdas: max_iter must be >= 1");
  if (l.size() != n || psi.size() != n) throw PreconditionError("pdas: size mismatch");
  const double scale = std::max(l.norm(), 1e-300);
  const double atol = tol * scale;

  std::vector<char> active(n, 0);
  if (opt.initial_active)
    for (int i : *opt.initial_active) {
      if (i < 0 || i >= n) throw PreconditionError("pdas: initial active index out of range");
      if (constrained[i]) active[i] = 1;
    }

  PdasState st;
  st.c_param = opt.c_param;
  std::set<std::vector<char>> seen;
  for (int it = 1; it <= max_iter; ++it) {
    seen.insert(active);
    st.u = solve(active);
    const Eigen::VectorXd grad = apply(st.u) - l;
    st.lambda = Eigen::VectorXd::Zero(n);
    std::vector<char> next(n, 0);
    int n_active = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!constrained[i]) continue;
      if (active[i]) st.lambda[i] = grad[i];
      if (st.lambda[i] + opt.c_param * (psi[i] - st.u[i]) > 0.0) {
        next[i] = 1;
        ++n_active;
      }
    }
    // KKT residual: stationarity off the active set, feasibility, dual sign.
    double res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[i]) {
        res = std::max(res, std::max(0.0, -st.lambda[i]));
      } else {
        res = std::max(res, std::abs(grad[i]));
        if (constrained[i]) res = std::max(res, std::max(0.0, psi[i] - st.u[i]));
      }
    }
    st.iteration = it;
    if (opt.verbose) std::fprintf(stderr, "iter %d %d %.6e\n", it, n_active, res / scale);
    if (next == active) {
      st.active.clear();
      for (Eigen::Index i = 0; i < n; ++i)
        if (active[i]) st.active.push_back(static_cast<int>(i));
      st.complementarity = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (constrained[i])
          st.complementarity = std::max(st.complementarity, std::abs((st.u[i] - psi[i]) * st.lambda[i]));
      if (res > atol) throw SolverFailure("pdas: active set settled but KKT residual above tolerance",
                                          std::vector<double>(st.u.data(), st.u.data() + n));
      return st;
    }
    if (seen.count(next)) {
      throw SolverFailure("pdas: active set cycle", std::vector<double>(st.u.data(), st.u.data() + n));
    }
    active = std::move(next);
  }
  throw SolverFailure("pdas: maximum number of iterations exceeded",
                      std::vector<double>(st.u.data(), st.u.data() + n));
}

}  // namespace

PdasState pdas_solve(const DiscreteObstacleProblem& problem, double tol, int max_iter, const PdasOptions& options) {
  const SparseMatrix& k = problem.stiffness;
  const Eigen::Index n = k.rows();
  ReducedSolver solver(k);
  const std::vector<char> constrained(n, 1);
  return pdas_loop(
      n, problem.load, problem.obstacle, constrained, tol, max_iter, options,
      [&](const std::vector<char>& active) { return solver.solve(problem.load, active, problem.obstacle); },
      [&](const Eigen::VectorXd& u) { return Eigen::VectorXd(k * u); });
}

PdasState pdas_solve_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& l, const Eigen::VectorXd& psi,
                           const std::vector<char>& constrained, double tol, int max_iter,
                           const PdasOptions& options) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || static_cast<Eigen::Index>(constrained.size()) != n)
    throw PreconditionError("pdas_solve_dense: size mismatch");
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (n > 0 && !(es.eigenvalues()[0] > 0.0)) throw DefinitenessError("pdas_solve_dense: A is not positive definite");
  return pdas_loop(
      n, l, psi, constrained, tol, max_iter, options,
      [&](const std::vector<char>& active) {
        std::vector<int> fr;
        for (Eigen::Index i = 0; i < n; ++i)
          if (!active[i]) fr.push_back(static_cast<int>(i));
        Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i)
          if (active[i]) u[i] = psi[i];
        if (fr.empty()) return u;
        const auto m = static_cast<Eigen::Index>(fr.size());
        Eigen::MatrixXd aff(m, m);
        Eigen::VectorXd b(m);
        for (Eigen::Index r = 0; r < m; ++r) {
          b[r] = l[fr[r]] - a.row(fr[r]).dot(u);
          for (Eigen::Index c = 0; c < m; ++c) aff(r, c) = a(fr[r], fr[c]);
        }
        // A may be nonsymmetric (perturbed instances); positivity of its
        // symmetric part was checked up front.
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(aff);
        Eigen::VectorXd x = lu.solve(b);
        x += lu.solve(b - aff * x);
        for (Eigen::Index r = 0; r < m; ++r) u[fr[r]] = x[r];
        return u;
      },
      [&](const Eigen::VectorXd& u) { return Eigen::VectorXd(a * u); });
}

}  // namespace vilab
