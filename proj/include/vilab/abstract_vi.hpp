#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace vilab {

/// Find u with u_i >= psi_i on the constrained indices and
/// <A u - l, v - u> >= 0 for all such v.
struct DenseVIInstance {
  Eigen::MatrixXd A;
  Eigen::VectorXd ell;
  Eigen::VectorXd psi;
  std::vector<int> constrained;  ///< 0-based, sorted

  Eigen::Index dim() const { return A.rows(); }
  std::vector<char> constrained_mask() const;
  /// Smallest eigenvalue of the symmetric part.
  double alpha() const;
  /// Largest singular value.
  double continuity() const;
  bool contains(const Eigen::VectorXd& v) const;
  Eigen::VectorXd project(const Eigen::VectorXd& v) const;
};

struct DenseVISolution {
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;  ///< A u - l on constrained indices, 0 elsewhere
  std::vector<int> active;
  bool used_fallback = false;
};

/// PDAS with c = 1; falls back to least-index principal pivoting if the
/// active set cycles.
DenseVISolution solve_dense_vi(const DenseVIInstance& inst, double tol = 1e-12, int max_iter = 100);

/// Principal pivoting with Murty's least-index rule. Finite for matrices with
/// positive definite symmetric part.
DenseVISolution solve_dense_vi_pivoting(const DenseVIInstance& inst, double tol = 1e-12);

struct PerturbedPair {
  DenseVIInstance base;
  Eigen::MatrixXd A_tilde;
  Eigen::VectorXd ell_tilde;
  Eigen::VectorXd psi_tilde;
  double alpha_tilde = 0.0;

  /// The perturbed problem as an instance (same constrained indices).
  DenseVIInstance perturbed() const;
};

/// Computes alpha_tilde; rejects pairs with alpha_tilde <= 0.
PerturbedPair make_perturbed_pair(DenseVIInstance base, Eigen::MatrixXd a_tilde, Eigen::VectorXd ell_tilde,
                                  Eigen::VectorXd psi_tilde);

struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool holds = false;
  /// C0..C3 for the constrained bound, zero otherwise.
  std::array<double, 4> constants{};
};

inline constexpr double kBoundTolRel = 1e-10;

BoundReport make_report(double lhs, double rhs);

/// (2 + 4c^2/at^2)|u - vt|^2 + (4/at)<Au - l, vt - u + v - ut>
///   + (4/at^2)|(A - At)vt - (l - lt)|^2
double strang_falk_rhs(const PerturbedPair& pair, const Eigen::VectorXd& u, const Eigen::VectorXd& u_tilde,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& v_tilde);

/// (4 + 8c^2/a^2)|u - vt|^2 + (8/a)<Au - l, vt - u + v - u*>
///   + (8/at^2)|(A - At)u* - (l - lt)|^2
double corollary_pert_rhs(const PerturbedPair& pair, const Eigen::VectorXd& u, const Eigen::VectorXd& u_star,
                          const Eigen::VectorXd& u_tilde, const Eigen::VectorXd& v, const Eigen::VectorXd& v_tilde);

/// D u + B^T lambda >= f (as a VI over u >= psi), B u - C lambda = g.
struct ConstrainedVIInstance {
  Eigen::MatrixXd D;
  Eigen::MatrixXd B;  ///< m x n
  Eigen::MatrixXd C;
  Eigen::VectorXd f;
  Eigen::VectorXd g;
  Eigen::VectorXd psi;
  Eigen::MatrixXd subspace_basis;  ///< m x k
  /// Bounds of the discrete set; psi if unset.
  std::optional<Eigen::VectorXd> psi_tilde;
};

struct ConstrainedConstants {
  double c_D = 0, alpha_D = 0, c_B = 0, c_Bt = 0, c_C = 0, alpha_C = 0;
  double C0 = 0, C1 = 0, C2 = 0, C3 = 0;
};

ConstrainedConstants constrained_constants(const ConstrainedVIInstance& inst);

/// A = D + B^T C^-1 B, l = f + B^T C^-1 g; every index constrained.
DenseVIInstance condense(const ConstrainedVIInstance& inst);

/// Ct^-1 = P (P^T C P)^-1 P^T.
Eigen::MatrixXd galerkin_inverse(const ConstrainedVIInstance& inst);

/// At = D + B^T Ct^-1 B, lt = f + B^T Ct^-1 g over the discrete bounds.
PerturbedPair galerkin_condense(const ConstrainedVIInstance& inst);

struct SaddleSolution {
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;
};

/// Solves the saddle system directly (active-set iteration on the full KKT
/// matrix). With `galerkin`, lambda is sought in span(P) and u >= psi_tilde.
SaddleSolution solve_saddle(const ConstrainedVIInstance& inst, bool galerkin, double tol = 1e-12);

/// lambda = C^-1 (B u - g).
Eigen::VectorXd recover_multiplier(const ConstrainedVIInstance& inst, const Eigen::VectorXd& u);

/// One report per trial. Trial 0 uses projections (vt = P_Kt u, v = P_K ut,
/// mt = orthogonal projection of lambda on span(P)); later trials sample
/// random admissible comparison elements.
std::vector<BoundReport> verify_constrained_bound(const ConstrainedVIInstance& inst, int trials,
                                                  std::uint64_t seed = 1);

// Random generators. Matrices are M^T M + 0.1 I with standard normal M.
Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng, double shift = 0.1);
DenseVIInstance random_instance(Eigen::Index n, std::mt19937_64& rng);
/// At = A + eps E with |E|_2 = 1; lt, psit perturbed by eps as well.
PerturbedPair random_pair(const DenseVIInstance& base, double eps, std::mt19937_64& rng);
ConstrainedVIInstance random_constrained(Eigen::Index n, Eigen::Index m, Eigen::Index k, std::mt19937_64& rng);

struct AbstractSuiteResult {
  std::vector<BoundReport> strang;
  std::vector<BoundReport> corollary;
  std::vector<BoundReport> lipschitz;
  int fallbacks = 0;
  bool all_hold() const;
};

/// `trials` seeded perturbed pairs with n <= 20; each checked with the
/// projection pair plus `samples` random (v, vt) pairs.
AbstractSuiteResult run_abstract_suite(int trials, std::uint64_t seed, int samples = 10);

struct ConstrainedSuiteResult {
  double max_saddle_gap = 0.0;         ///< saddle vs condensed, max abs componentwise
  double max_equality_residual = 0.0;  ///< |B u - C lambda - g|
  double min_ellipticity_margin = 0.0; ///< min over trials of lambda_min(A) - alpha_D
  double min_psd_eig = 0.0;            ///< min eigenvalue of sym(B^T Ct^-1 B)
  double max_norm_excess = 0.0;        ///< |Ct^-1|_2 - 1/alpha_C
  std::vector<BoundReport> reports;
  bool all_hold() const;
};

ConstrainedSuiteResult run_constrained_suite(int trials, std::uint64_t seed, int samples = 5);

}  // namespace vilab
