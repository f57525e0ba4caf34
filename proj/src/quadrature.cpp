#include "vilab/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "vilab/errors.hpp"

namespace vilab {

std::array<double, 2> legendre(int n, double x) {
  if (n == 0) return {1.0, 0.0};
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  // P_n' from (x^2 - 1) P_n' = n (x P_n - P_{n-1}); endpoints by closed form.
  double dp;
  if (std::abs(std::abs(x) - 1.0) < 1e-15) {
    dp = 0.5 * n * (n + 1.0) * (x > 0 ? 1.0 : (n % 2 == 0 ? -1.0 : 1.0));
  } else {
    dp = n * (x * p1 - p0) / (x * x - 1.0);
  }
  return {p1, dp};
}

QuadRule1D gauss_legendre(int q) {
  if (q < 1) throw PreconditionError("gauss_legendre: q must be >= 1");
  QuadRule1D rule;
  rule.q = q;
  rule.nodes.resize(q);
  rule.weights.resize(q);
  for (int k = 0; k < (q + 1) / 2; ++k) {
    // Chebyshev-type initial guess for the k-th largest root.
    double x = std::cos(std::numbers::pi * (k + 0.75) / (q + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(q, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double dp = legendre(q, x)[1];
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[q - 1 - k] = x;
    rule.nodes[k] = -x;
    rule.weights[q - 1 - k] = w;
    rule.weights[k] = w;
  }
  if (q % 2 == 1) rule.nodes[q / 2] = 0.0;
  return rule;
}

QuadRule1D gauss_lobatto(int n) {
  if (n < 2) throw PreconditionError("gauss_lobatto: need at least 2 points");
  const int N = n - 1;  // interior nodes are the roots of P_N'
  QuadRule1D rule;
  rule.q = n;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  rule.nodes.front() = -1.0;
  rule.nodes.back() = 1.0;
  for (int k = 1; k <= (N - 1 + 1) / 2; ++k) {
    double x = std::cos(std::numbers::pi * k / N);
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(N, x);
      // (1 - x^2) P'' = 2 x P' - N (N + 1) P
      const double d2p = (2.0 * x * dp - N * (N + 1.0) * p) / (1.0 - x * x);
      const double dx = dp / d2p;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[n - 1 - k] = x;
    rule.nodes[k] = -x;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  for (int k = 0; k < n; ++k) {
    const double p = legendre(N, rule.nodes[k])[0];
    rule.weights[k] = 2.0 / (N * (N + 1.0) * p * p);
  }
  return rule;
}

TensorQuadRule tensor_rule(int q) {
  TensorQuadRule rule;
  rule.base = gauss_legendre(q);
  rule.order = rule.base.order();
  rule.points.reserve(q * q);
  rule.weights.reserve(q * q);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < q; ++i) {
      rule.points.push_back({rule.base.nodes[i], rule.base.nodes[j]});
      rule.weights.push_back(rule.base.weights[i] * rule.base.weights[j]);
    }
  return rule;
}

LagrangeBasis1D::LagrangeBasis1D(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  const std::size_t n = nodes_.size();
  bary_.assign(n, 1.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) bary_[k] /= (nodes_[k] - nodes_[j]);
}

void LagrangeBasis1D::eval(double x, std::span<double> values, std::span<double> derivs) const {
  const std::size_t n = nodes_.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (x == nodes_[k]) {
      // Exact hit: l_k = delta, l_j'(x_k) = (w_j / w_k) / (x_k - x_j), l_k'(x_k) = -sum.
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        values[j] = (j == k) ? 1.0 : 0.0;
        if (j != k) {
          derivs[j] = (bary_[j] / bary_[k]) / (nodes_[k] - nodes_[j]);
          sum += derivs[j];
        }
      }
      derivs[k] = -sum;
      return;
    }
  }
  // Product form: l_k(x) = w_k * prod_{j != k}(x - x_j).
  // l_k'(x) = l_k(x) * sum_{j != k} 1 / (x - x_j).
  double ell = 1.0;
  for (std::size_t j = 0; j < n; ++j) ell *= (x - nodes_[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total += 1.0 / (x - nodes_[j]);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = x - nodes_[k];
    values[k] = ell * bary_[k] / d;
    derivs[k] = values[k] * (total - 1.0 / d);
  }
}

namespace {

// Legendre-product basis L_i(x) L_j(y), i, j <= p; index 0 is the constant.
struct TensorLegendre {
  int p;
  int dim() const { return (p + 1) * (p + 1); }
  void eval(double x, double y, Eigen::VectorXd& v, Eigen::VectorXd& dx, Eigen::VectorXd& dy) const {
    std::vector<std::array<double, 2>> lx(p + 1), ly(p + 1);
    for (int k = 0; k <= p; ++k) {
      lx[k] = legendre(k, x);
      ly[k] = legendre(k, y);
    }
    v.resize(dim());
    dx.resize(dim());
    dy.resize(dim());
    for (int j = 0; j <= p; ++j)
      for (int i = 0; i <= p; ++i) {
        const int idx = j * (p + 1) + i;
        v[idx] = lx[i][0] * ly[j][0];
        dx[idx] = lx[i][1] * ly[j][0];
        dy[idx] = lx[i][0] * ly[j][1];
      }
  }
};

struct Grams {
  Eigen::MatrixXd grad;  // on the non-constant part
  Eigen::MatrixXd mass;  // full space
};

Grams quadrature_grams(int p, const TensorQuadRule& rule) {
  TensorLegendre basis{p};
  const int n = basis.dim();
  Grams g;
  g.grad = Eigen::MatrixXd::Zero(n - 1, n - 1);
  g.mass = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd v, dx, dy;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    basis.eval(rule.points[k][0], rule.points[k][1], v, dx, dy);
    const double w = rule.weights[k];
    g.mass.noalias() += w * v * v.transpose();
    const auto gx = dx.tail(n - 1);
    const auto gy = dy.tail(n - 1);
    g.grad.noalias() += w * (gx * gx.transpose() + gy * gy.transpose());
  }
  return g;
}

double equivalence_constant(const Eigen::MatrixXd& approx, const Eigen::MatrixXd& exact) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(approx, exact);
  const auto& ev = ges.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (lo <= 1e-12 * hi) return std::numeric_limits<double>::infinity();
  return std::max(hi, 1.0 / lo);
}

}  // namespace

bool check_admissibility(int p, const TensorQuadRule& rule) {
  if (p < 1) throw PreconditionError("check_admissibility: p must be >= 1");
  TensorLegendre basis{p};
  const int n = basis.dim();
  Eigen::MatrixXd G(2 * rule.size(), n - 1);
  Eigen::VectorXd v, dx, dy;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    basis.eval(rule.points[k][0], rule.points[k][1], v, dx, dy);
    G.row(2 * k) = dx.tail(n - 1).transpose();
    G.row(2 * k + 1) = dy.tail(n - 1).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const auto& s = svd.singularValues();
  if (s.size() < n - 1) return false;
  const double thresh = 1e-10 * s(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > thresh) ++rank;
  return rank == n - 1;
}

bool has_enough_points(int p, const TensorQuadRule& rule) {
  return static_cast<int>(rule.size()) - 1 >= (p + 1) * (p + 1);
}

QuadEquivalenceReport estimate_equivalence_constants(int p, const TensorQuadRule& rule) {
  QuadEquivalenceReport rep;
  rep.p = p;
  rep.q = rule.base.q;
  rep.admissible = check_admissibility(p, rule);
  rep.enough_points = has_enough_points(p, rule);
  if (!rep.admissible) {
    rep.c_p = rep.d_p = std::numeric_limits<double>::infinity();
    return rep;
  }
  const Grams approx = quadrature_grams(p, rule);
  const Grams exact = quadrature_grams(p, tensor_rule(p + 2));
  rep.c_p = equivalence_constant(approx.grad, exact.grad);
  rep.d_p = equivalence_constant(approx.mass, exact.mass);
  return rep;
}

}  // namespace vilab
