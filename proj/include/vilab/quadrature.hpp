#pragma once

#include <array>
#include <span>
#include <vector>

namespace vilab {

/// One-dimensional rule on [-1, 1].
struct QuadRule1D {
  int q = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Order in the sense "polynomials of degree < order are integrated exactly".
  int order() const { return 2 * q; }
};

/// q x q tensor rule on the reference square [-1, 1]^2. Points are stored
/// lexicographically with the first coordinate running fastest.
struct TensorQuadRule {
  QuadRule1D base;
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
  int order = 0;

  std::size_t size() const { return weights.size(); }
};

/// Legendre polynomial P_n and its derivative at x, by the three-term recurrence.
std::array<double, 2> legendre(int n, double x);

/// Gauss-Legendre rule with q points (exact up to degree 2q - 1).
QuadRule1D gauss_legendre(int q);

/// Gauss-Lobatto-Legendre rule with n >= 2 points, endpoints included.
QuadRule1D gauss_lobatto(int n);

TensorQuadRule tensor_rule(int q);

/// Lagrange basis on a fixed set of 1D nodes, evaluated in barycentric form.
class LagrangeBasis1D {
 public:
  explicit LagrangeBasis1D(std::vector<double> nodes);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }

  /// Fills values[k] = l_k(x) and derivs[k] = l_k'(x).
  void eval(double x, std::span<double> values, std::span<double> derivs) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> bary_;
};

/// True iff v -> (grad v(xi_i))_i has only the constants as kernel on the
/// tensor space Q_p. Decided by the numerical rank of the gradient-evaluation
/// matrix over a Legendre-product basis without the constant.
bool check_admissibility(int p, const TensorQuadRule& rule);

/// m_p >= dim P_p, i.e. q^2 - 1 >= (p + 1)^2.
bool has_enough_points(int p, const TensorQuadRule& rule);

struct QuadEquivalenceReport {
  int p = 0;
  int q = 0;
  double c_p = 0.0;  ///< gradient form vs |.|_{H^1}^2 on Q_p / R
  double d_p = 0.0;  ///< mass form vs ||.||_{L^2}^2 on Q_p
  bool admissible = false;
  bool enough_points = false;
};

/// Tight constants from generalized eigenvalues of the quadrature Gram
/// matrices against the exact ones. A singular quadrature form yields +inf.
QuadEquivalenceReport estimate_equivalence_constants(int p, const TensorQuadRule& rule);

}  // namespace vilab
