#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <random>

#include "vilab/abstract_vi.hpp"
#include "vilab/errors.hpp"

using namespace vilab;

namespace {

DenseVIInstance instance(Eigen::MatrixXd a, Eigen::VectorXd l, Eigen::VectorXd psi, std::vector<int> c) {
  DenseVIInstance inst;
  inst.A = std::move(a);
  inst.ell = std::move(l);
  inst.psi = std::move(psi);
  inst.constrained = std::move(c);
  return inst;
}

/// Minimizes the energy of an SPD instance over a grid (oracle for tiny n).
double grid_minimizer_1d(double a, double l, double lo, double hi, int steps) {
  double best = lo, best_e = 1e300;
  for (int i = 0; i <= steps; ++i) {
    const double v = lo + (hi - lo) * i / steps;
    const double e = 0.5 * a * v * v - l * v;
    if (e < best_e) {
      best_e = e;
      best = v;
    }
  }
  return best;
}

}  // namespace

TEST(DenseVI, OneDimensionalExample) {
  const auto inst = instance(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 4.0),
                             Eigen::VectorXd::Constant(1, 3.0), {0});
  const auto s = solve_dense_vi(inst);
  EXPECT_NEAR(s.u[0], grid_minimizer_1d(2.0, 4.0, 3.0, 10.0, 70000), 1e-4);
  EXPECT_NEAR(s.u[0], 3.0, 1e-14);
  EXPECT_NEAR(s.lambda[0], 2.0, 1e-14);
  EXPECT_EQ(s.active, std::vector<int>{0});
}

TEST(DenseVI, TwoDimensionalExample) {
  const auto inst = instance(2.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(2, 6), Eigen::Vector2d(2, 2), {0, 1});
  const auto s = solve_dense_vi(inst);
  // Decoupled: component minimizers on [2, 10] by grid search.
  EXPECT_NEAR(s.u[0], grid_minimizer_1d(2.0, 2.0, 2.0, 10.0, 80000), 1e-4);
  EXPECT_NEAR(s.u[1], grid_minimizer_1d(2.0, 6.0, 2.0, 10.0, 80000), 1e-4);
  EXPECT_NEAR(s.u[0], 2.0, 1e-14);
  EXPECT_NEAR(s.u[1], 3.0, 1e-14);
  EXPECT_EQ(s.active, std::vector<int>{0});
}

TEST(DenseVI, EffectivelyUnconstrained) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd a = random_spd(7, rng);
  const Eigen::VectorXd l = Eigen::VectorXd::LinSpaced(7, -2.0, 3.0);
  const auto s = solve_dense_vi(instance(a, l, Eigen::VectorXd::Constant(7, -1e9), {0, 1, 2, 3, 4, 5, 6}));
  EXPECT_TRUE(s.active.empty());
  EXPECT_LE((s.u - a.ldlt().solve(l)).norm(), 1e-10);
  EXPECT_LE(s.lambda.norm(), 1e-12);
}

TEST(DenseVI, PivotingAgreesWithPdasOnNonsymmetric) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto base = random_instance(2 + t % 10, rng);
    const auto pair = random_pair(base, 0.1, rng);
    const auto inst = pair.perturbed();
    const auto a = solve_dense_vi(inst);
    const auto b = solve_dense_vi_pivoting(inst);
    EXPECT_LE((a.u - b.u).cwiseAbs().maxCoeff(), 1e-9);
    // Variational inequality: <A u - l, v - u> >= 0 at the projections of random points.
    for (int s = 0; s < 5; ++s) {
      Eigen::VectorXd v = inst.project(a.u + Eigen::VectorXd::Random(inst.dim()));
      EXPECT_GE((inst.A * a.u - inst.ell).dot(v - a.u), -1e-9);
    }
  }
}

TEST(PerturbedPair, RejectsNonEllipticPerturbation) {
  const auto base = instance(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 0), {0, 1});
  EXPECT_THROW(make_perturbed_pair(base, -Eigen::MatrixXd::Identity(2, 2), base.ell, base.psi), PreconditionError);
}

TEST(StrangFalk, IdenticalProblemsGiveZero) {
  std::mt19937_64 rng(12);
  const auto base = random_instance(6, rng);
  const auto pair = make_perturbed_pair(base, base.A, base.ell, base.psi);
  const auto u = solve_dense_vi(base).u;
  EXPECT_NEAR(strang_falk_rhs(pair, u, u, u, u), 0.0, 1e-14);
}

TEST(StrangFalk, LoadPerturbationRecoversLipschitzBound) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    const auto base = random_instance(1 + t % 9, rng);
    Eigen::VectorXd lt = base.ell + 0.3 * Eigen::VectorXd::Random(base.dim());
    const auto pair = make_perturbed_pair(base, base.A, lt, base.psi);
    const auto u = solve_dense_vi(base).u;
    const auto ut = solve_dense_vi(pair.perturbed()).u;
    const double alpha = base.alpha();
    const double rhs = strang_falk_rhs(pair, u, ut, ut, u);
    EXPECT_NEAR(rhs, 4.0 / (alpha * alpha) * (base.ell - lt).squaredNorm(), 1e-9 * (1.0 + rhs));
    EXPECT_LE((u - ut).norm(), 2.0 / alpha * (base.ell - lt).norm() * (1 + 1e-10));
  }
}

TEST(Corollary, NoPerturbationDropsThirdTerm) {
  std::mt19937_64 rng(14);
  const auto base = random_instance(5, rng);
  const auto pair = make_perturbed_pair(base, base.A, base.ell, base.psi);
  const auto u = solve_dense_vi(base).u;
  const Eigen::VectorXd ustar = base.project(u + Eigen::VectorXd::Random(5));
  const Eigen::VectorXd v = base.project(u + Eigen::VectorXd::Random(5));
  const Eigen::VectorXd vt = base.project(u + Eigen::VectorXd::Random(5));
  const double a = base.alpha(), c = base.continuity();
  const double expected = (4 + 8 * c * c / (a * a)) * (u - vt).squaredNorm() +
                          8 / a * (base.A * u - base.ell).dot(vt - u + v - ustar);
  EXPECT_NEAR(corollary_pert_rhs(pair, u, ustar, u, v, vt), expected, 1e-10 * (1 + std::abs(expected)));
}

TEST(AbstractSuite, SmallRandomSuiteHolds) {
  const auto r = run_abstract_suite(100, 3);
  EXPECT_TRUE(r.all_hold());
  EXPECT_EQ(r.strang.size(), 100u * 11u);
  for (const auto& b : r.strang) EXPECT_LE(b.lhs, b.rhs * (1 + kBoundTolRel) + kBoundTolRel);
}

TEST(Condensation, IdentityAlgebra) {
  ConstrainedVIInstance inst;
  inst.D = inst.B = inst.C = Eigen::MatrixXd::Identity(2, 2);
  inst.f = Eigen::Vector2d(1, -2);
  inst.g = Eigen::Vector2d(0.5, 3);
  inst.psi = Eigen::Vector2d(-5, -5);
  inst.subspace_basis = Eigen::MatrixXd::Identity(2, 2);
  const auto c = condense(inst);
  EXPECT_LE((c.A - 2 * Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LE((c.ell - (inst.f + inst.g)).norm(), 1e-15);
}

TEST(Condensation, EllipticityAndMultiplierRecovery) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 20; ++t) {
    const auto inst = random_constrained(2 + t % 10, 2 + (t * 7) % 10, 1, rng);
    const auto k = constrained_constants(inst);
    const auto cond = condense(inst);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cond.A + cond.A.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), k.alpha_D - 1e-12);
    const auto s = solve_dense_vi(cond);
    const Eigen::VectorXd lam = recover_multiplier(inst, s.u);
    EXPECT_LE((inst.B * s.u - inst.C * lam - inst.g).norm(), 1e-10);
  }
}

TEST(Galerkin, FullAndEmptySubspaces) {
  std::mt19937_64 rng(22);
  auto inst = random_constrained(6, 4, 2, rng);
  inst.subspace_basis = Eigen::MatrixXd::Identity(4, 4);
  const auto full = galerkin_condense(inst);
  const auto exact = condense(inst);
  EXPECT_LE((full.A_tilde - exact.A).norm(), 1e-12 * exact.A.norm());
  EXPECT_LE((full.ell_tilde - exact.ell).norm(), 1e-12 * (1 + exact.ell.norm()));

  inst.subspace_basis = Eigen::MatrixXd(4, 0);
  EXPECT_EQ(galerkin_inverse(inst).norm(), 0.0);
  const auto empty = galerkin_condense(inst);
  EXPECT_LE((empty.A_tilde - inst.D).norm(), 1e-15);
  EXPECT_LE((empty.ell_tilde - inst.f).norm(), 1e-15);
}

TEST(Galerkin, SemiDefiniteAndNormBounded) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 20; ++t) {
    const auto inst = random_constrained(5, 8, 4, rng);
    const auto k = constrained_constants(inst);
    const Eigen::MatrixXd ci = galerkin_inverse(inst);
    const Eigen::MatrixXd bcb = inst.B.transpose() * ci * inst.B;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (bcb + bcb.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    EXPECT_LE(ci.jacobiSvd().singularValues()[0], 1.0 / k.alpha_C + 1e-10);
  }
}

TEST(ConstrainedConstants, ClosedForms) {
  std::mt19937_64 rng(24);
  const auto inst = random_constrained(4, 3, 2, rng);
  const auto k = constrained_constants(inst);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ed(inst.D), ec(inst.C);
  EXPECT_NEAR(k.alpha_D, ed.eigenvalues().minCoeff(), 1e-12);
  EXPECT_NEAR(k.c_D, ed.eigenvalues().maxCoeff(), 1e-10);
  EXPECT_NEAR(k.alpha_C, ec.eigenvalues().minCoeff(), 1e-12);
  EXPECT_NEAR(k.c_B, inst.B.jacobiSvd().singularValues()[0], 1e-10);
  const double s = 1 + 2 * k.c_B / k.alpha_C;
  const double c0 = 2 + 4 * std::pow(k.c_D * k.alpha_C + k.c_B * k.c_B, 2) / std::pow(k.alpha_C * k.alpha_D, 2) +
                    2 * (k.c_Bt * k.alpha_C + k.c_B) / k.alpha_C;
  EXPECT_NEAR(k.C0, c0, 1e-12 * c0);
  EXPECT_NEAR(k.C1, s * c0, 1e-12 * s * c0);
  EXPECT_NEAR(k.C2, s * (2 + (2 * k.c_C + k.c_Bt * k.c_C) / k.alpha_C), 1e-12 * k.C2);
  EXPECT_NEAR(k.C3, s * 4 / (k.alpha_D * k.alpha_D), 1e-12 * k.C3);
}

TEST(ConstrainedBound, FullSubspaceIsExact) {
  std::mt19937_64 rng(25);
  auto inst = random_constrained(5, 4, 2, rng);
  inst.subspace_basis = Eigen::MatrixXd::Identity(4, 4);
  inst.psi_tilde.reset();
  const auto r = verify_constrained_bound(inst, 3);
  for (const auto& b : r) {
    EXPECT_LE(b.lhs, 1e-20);
    EXPECT_TRUE(b.holds);
  }
}

TEST(ConstrainedBound, SaddleMatchesCondensed) {
  std::mt19937_64 rng(26);
  for (int t = 0; t < 20; ++t) {
    const auto inst = random_constrained(3 + t % 8, 2 + t % 9, 1, rng);
    const auto sad = solve_saddle(inst, false);
    const auto con = solve_dense_vi(condense(inst));
    EXPECT_LE((sad.u - con.u).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((sad.lambda - recover_multiplier(inst, con.u)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ConstrainedBound, NestedSubspaceSweep) {
  // Nested subspaces span(Q_1..Q_k): the bound holds at every k and the error
  // vanishes at k = m. The error is not monotone in k (here it grows from
  // k = 1 to k = 2), so no monotonicity is asserted.
  std::mt19937_64 rng(27);
  auto inst = random_constrained(8, 10, 5, rng);
  inst.psi_tilde.reset();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(10, 10)).householderQ();
  std::vector<double> lhs;
  for (int k = 0; k <= 10; ++k) {
    inst.subspace_basis = q.leftCols(k);
    const auto r = verify_constrained_bound(inst, 3);
    for (const auto& b : r) EXPECT_TRUE(b.holds) << "k=" << k;
    lhs.push_back(r[0].lhs);
  }
  EXPECT_GT(lhs[2], lhs[1]);
  EXPECT_LE(lhs.back(), 1e-20);
}

TEST(ConstrainedSuite, SmallRandomSuiteHolds) {
  const auto r = run_constrained_suite(20, 5);
  EXPECT_TRUE(r.all_hold());
  EXPECT_LE(r.max_saddle_gap, 1e-10);
  EXPECT_LE(r.max_equality_residual, 1e-10);
  EXPECT_GE(r.min_ellipticity_margin, -1e-10);
  EXPECT_GE(r.min_psd_eig, -1e-10);
  EXPECT_LE(r.max_norm_excess, 1e-10);
}
