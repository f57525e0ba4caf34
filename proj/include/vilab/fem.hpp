#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "vilab/geometry.hpp"
#include "vilab/mesh.hpp"
#include "vilab/quadrature.hpp"

namespace vilab {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ScalarField = std::function<double(const Point2&)>;

enum class DofKind : unsigned char { Free, Dirichlet, Hanging };

/// Continuous tensor Lagrange space of degree p on Gauss-Lobatto nodes.
///
/// Every mesh node carries a "total" DOF. Free DOFs are the unknowns;
/// Dirichlet DOFs sit on |x| = R and are zero; hanging DOFs are linear
/// combinations of free DOFs through the coarse-edge trace.
class FESpace {
 public:
  FESpace(std::shared_ptr<const Mesh> mesh, int p);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  int degree() const { return p_; }
  int dofs_per_element() const { return (p_ + 1) * (p_ + 1); }

  std::size_t num_total() const { return kind_.size(); }
  std::size_t num_free() const { return free_to_total_.size(); }
  std::size_t num_hanging() const;

  /// Local DOF (i, j) with i along the first reference coordinate is at
  /// position j * (p + 1) + i.
  const std::vector<int>& element_dofs(std::size_t e) const { return elem_dofs_[e]; }

  DofKind kind(int total) const { return kind_[total]; }
  int free_index(int total) const { return free_index_[total]; }
  int total_index(int free) const { return free_to_total_[free]; }
  const Point2& node(int total) const { return nodes_[total]; }

  /// Expansion of a total DOF into (free index, weight) pairs.
  const std::vector<std::pair<int, double>>& expansion(int total) const { return expansion_[total]; }

  /// Constraint points G_hp: the nodes of the free DOFs, in free order.
  std::vector<Point2> constraint_points() const;

  /// Total-DOF vector from free coefficients (Dirichlet = 0, hanging resolved).
  Eigen::VectorXd expand(const Eigen::VectorXd& free_coeffs) const;

  /// Nodal interpolant on the free DOFs.
  Eigen::VectorXd interpolate(const ScalarField& g) const;

  /// Reference Gauss-Lobatto nodes.
  const std::vector<double>& reference_nodes() const { return basis_.nodes(); }
  const LagrangeBasis1D& basis() const { return basis_; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  int p_;
  LagrangeBasis1D basis_;
  std::vector<std::vector<int>> elem_dofs_;
  std::vector<DofKind> kind_;
  std::vector<int> free_index_;
  std::vector<int> free_to_total_;
  std::vector<Point2> nodes_;
  std::vector<std::vector<std::pair<int, double>>> expansion_;
};

/// Tensor basis values and reference gradients at a set of reference points.
struct ReferenceTable {
  int p = 0;
  std::vector<Point2> points;
  std::vector<double> weights;
  Eigen::MatrixXd values;  // (n_points, n_local)
  Eigen::MatrixXd dxi;
  Eigen::MatrixXd deta;
};

ReferenceTable make_reference_table(const FESpace& space, const TensorQuadRule& rule);

/// Quadrature-assembled obstacle problem on the free DOFs.
struct DiscreteObstacleProblem {
  SparseMatrix stiffness;
  Eigen::VectorXd load;
  Eigen::VectorXd obstacle;  ///< psi at the constraint points (free DOFs)
  int quad_q = 0;
  int degree = 0;
};

/// K_ij = sum_D Q_D(a grad phi_i . grad phi_j), l_i = sum_D Q_D(f phi_i) with a
/// q x q Gauss rule, hanging DOFs condensed and Dirichlet DOFs eliminated.
DiscreteObstacleProblem assemble(const FESpace& space, const ScalarField& a, const ScalarField& f,
                                 const ScalarField& psi, int q);

/// Element matrix and load in total-DOF local numbering.
void local_system(const FESpace& space, std::size_t e, const ReferenceTable& table, const ScalarField& a,
                  const ScalarField& f, Eigen::MatrixXd& k_local, Eigen::VectorXd& f_local);

struct SolutionPoint {
  double value = 0.0;
  Point2 gradient;
};

/// Value and physical gradient of the discrete function with total
/// coefficients `coeffs` on element `e` at reference point `xhat`.
SolutionPoint evaluate_solution(const FESpace& space, const Eigen::VectorXd& coeffs, std::size_t e,
                                const Point2& xhat);

struct SpectrumReport {
  double min_eig = 0.0;
  double max_eig = 0.0;
  /// Eigenvalues with |lambda| <= 1e-10 max_eig.
  int near_zero = 0;
  bool positive_definite = false;
  bool dense = false;
};

/// Extreme eigenvalues of the stiffness matrix: dense symmetric solver up
/// to `dense_limit` unknowns, Lanczos otherwise.
SpectrumReport spectrum_report(const DiscreteObstacleProblem& problem, std::size_t dense_limit = 4000);

/// Largest eigenvalue of a symmetric sparse matrix by Lanczos with full
/// reorthogonalization.
double lanczos_max_eigenvalue(const SparseMatrix& k, int steps = 200);

}  // namespace vilab
