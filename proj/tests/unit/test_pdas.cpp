#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "vilab/errors.hpp"
#include "vilab/fem.hpp"
#include "vilab/mesh.hpp"
#include "vilab/pdas.hpp"
#include "vilab/study.hpp"

using namespace vilab;

namespace {

DiscreteObstacleProblem dense_problem(const Eigen::MatrixXd& k, const Eigen::VectorXd& l, const Eigen::VectorXd& psi) {
  DiscreteObstacleProblem p;
  p.stiffness = k.sparseView();
  p.load = l;
  p.obstacle = psi;
  return p;
}

Eigen::MatrixXd random_spd_matrix(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  return m.transpose() * m + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

/// Enumerates all active sets and returns the unique KKT point.
Eigen::VectorXd brute_force(const Eigen::MatrixXd& k, const Eigen::VectorXd& l, const Eigen::VectorXd& psi) {
  const int n = static_cast<int>(k.rows());
  for (int mask = 0; mask < (1 << n); ++mask) {
    Eigen::VectorXd u = psi;
    std::vector<int> fr;
    for (int i = 0; i < n; ++i)
      if (!(mask >> i & 1)) fr.push_back(i);
    if (!fr.empty()) {
      const int m = static_cast<int>(fr.size());
      Eigen::MatrixXd a(m, m);
      Eigen::VectorXd b(m);
      for (int r = 0; r < m; ++r) {
        b[r] = l[fr[r]];
        for (int i = 0; i < n; ++i)
          if (mask >> i & 1) b[r] -= k(fr[r], i) * psi[i];
        for (int c = 0; c < m; ++c) a(r, c) = k(fr[r], fr[c]);
      }
      const Eigen::VectorXd x = a.ldlt().solve(b);
      for (int r = 0; r < m; ++r) u[fr[r]] = x[r];
    }
    const Eigen::VectorXd lam = k * u - l;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = (mask >> i & 1) ? lam[i] >= -1e-12 : u[i] >= psi[i] - 1e-12;
    if (ok) return u;
  }
  return {};
}

}  // namespace

TEST(Pdas, OneDimensionalToy) {
  Eigen::MatrixXd k(1, 1);
  k << 2;
  const auto st = pdas_solve(dense_problem(k, Eigen::VectorXd::Constant(1, 4.0), Eigen::VectorXd::Constant(1, 3.0)));
  EXPECT_NEAR(st.u[0], 3.0, 1e-14);
  EXPECT_NEAR(st.lambda[0], 2.0, 1e-14);
  ASSERT_EQ(st.active.size(), 1u);
  EXPECT_EQ(st.active[0], 0);
}

TEST(Pdas, UnconstrainedSolvesInOneIteration) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd k = random_spd_matrix(8, rng);
  const Eigen::VectorXd l = Eigen::VectorXd::LinSpaced(8, -1.0, 2.0);
  const auto st = pdas_solve(dense_problem(k, l, Eigen::VectorXd::Constant(8, -1e9)));
  EXPECT_TRUE(st.active.empty());
  EXPECT_EQ(st.iteration, 1);
  EXPECT_LE((st.u - k.ldlt().solve(l)).norm(), 1e-10);
  EXPECT_EQ(st.lambda.norm(), 0.0);
}

TEST(Pdas, MatchesBruteForceAndKkt) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 8;
    const Eigen::MatrixXd k = random_spd_matrix(n, rng);
    Eigen::VectorXd l(n), psi(n);
    for (int i = 0; i < n; ++i) {
      l[i] = g(rng);
      psi[i] = g(rng);
    }
    const Eigen::VectorXd oracle = brute_force(k, l, psi);
    ASSERT_EQ(oracle.size(), n);
    const auto st = pdas_solve(dense_problem(k, l, psi), 1e-12, 200);
    EXPECT_LE((st.u - oracle).cwiseAbs().maxCoeff(), 1e-9) << "trial " << t;
    const Eigen::VectorXd lam = k * st.u - l;
    std::vector<char> act(n, 0);
    for (int i : st.active) act[i] = 1;
    for (int i = 0; i < n; ++i) {
      if (act[i]) {
        EXPECT_NEAR(st.u[i], psi[i], 1e-14);
        EXPECT_GE(st.lambda[i], -1e-10);
        EXPECT_NEAR(st.lambda[i], lam[i], 1e-10);
      } else {
        EXPECT_EQ(st.lambda[i], 0.0);
        EXPECT_GE(st.u[i], psi[i] - 1e-10);
      }
    }
  }
}

TEST(Pdas, DenseVariantHonoursUnconstrainedIndices) {
  Eigen::MatrixXd a(2, 2);
  a << 2, 0, 0, 2;
  const Eigen::Vector2d l(2, 6), psi(2, 2);
  const auto st = pdas_solve_dense(a, l, psi, {1, 1}, 1e-12, 50);
  EXPECT_NEAR(st.u[0], 2.0, 1e-14);
  EXPECT_NEAR(st.u[1], 3.0, 1e-14);
  ASSERT_EQ(st.active.size(), 1u);
  EXPECT_EQ(st.active[0], 0);
  const auto free = pdas_solve_dense(a, l, psi, {0, 1}, 1e-12, 50);
  EXPECT_NEAR(free.u[0], 1.0, 1e-14);
}

TEST(Pdas, InitializationIndependence) {
  auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(1.5, 2));
  FESpace space(mesh, 2);
  const double psi = ExactRadialSolution().psi_const;
  const auto prob = assemble(space, [](const Point2&) { return 1.0; }, [](const Point2&) { return -2.0; },
                             [psi](const Point2&) { return psi; }, 4);
  const auto cold = pdas_solve(prob);
  PdasOptions all;
  all.initial_active = std::vector<int>(space.num_free());
  for (std::size_t i = 0; i < space.num_free(); ++i) (*all.initial_active)[i] = static_cast<int>(i);
  const auto hot = pdas_solve(prob, 1e-10, 100, all);
  EXPECT_EQ(cold.active, hot.active);
  EXPECT_LE((cold.u - hot.u).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pdas, DiskContactSetIsUnitDisk) {
  auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(1.5, 3));
  FESpace space(mesh, 1);
  const double psi = ExactRadialSolution().psi_const;
  const auto prob = assemble(space, [](const Point2&) { return 1.0; }, [](const Point2&) { return -2.0; },
                             [psi](const Point2&) { return psi; }, 12);
  const auto st = pdas_solve(prob);
  ASSERT_FALSE(st.active.empty());
  int inside = 0;
  for (int i : st.active) inside += space.node(space.total_index(i)).norm() <= 1.0 ? 1 : 0;
  EXPECT_GE(double(inside) / double(st.active.size()), 0.95);
}

TEST(Pdas, UnderIntegratedMatrixIsRejected) {
  auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(1.5, 1));
  FESpace space(mesh, 2);
  const auto prob = assemble(space, [](const Point2&) { return 1.0; }, [](const Point2&) { return -2.0; },
                             [](const Point2&) { return -1.0; }, 1);
  EXPECT_THROW(pdas_solve(prob), DefinitenessError);
}

TEST(Pdas, InvalidArguments) {
  Eigen::MatrixXd k(1, 1);
  k << 1;
  const auto p = dense_problem(k, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1));
  EXPECT_THROW(pdas_solve(p, 0.0), PreconditionError);
  EXPECT_THROW(pdas_solve(p, 1e-10, 0), PreconditionError);
}

TEST(ReducedSystem, Examples) {
  const int n = 6;
  SparseMatrix eye(n, n);
  eye.setIdentity();
  const Eigen::VectorXd rhs = Eigen::VectorXd::LinSpaced(n, 1.0, 6.0);
  EXPECT_LE((solve_reduced_system(eye, rhs, {}) - rhs).norm(), 1e-15);

  std::vector<std::pair<int, double>> all;
  for (int i = 0; i < n; ++i) all.emplace_back(i, -i * 0.5);
  const Eigen::VectorXd fixed = solve_reduced_system(eye, rhs, all);
  for (int i = 0; i < n; ++i) EXPECT_EQ(fixed[i], -i * 0.5);
}

TEST(ReducedSystem, RandomSpdAgainstDenseOracle) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin(0.3);
  const int n = 50;
  const Eigen::MatrixXd k = random_spd_matrix(n, rng);
  Eigen::VectorXd rhs(n);
  for (auto& v : rhs) v = g(rng);
  std::vector<std::pair<int, double>> fixed;
  std::vector<int> fr;
  for (int i = 0; i < n; ++i) {
    if (coin(rng)) fixed.emplace_back(i, g(rng));
    else fr.push_back(i);
  }
  const Eigen::VectorXd u = solve_reduced_system(k.sparseView(), rhs, fixed);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (auto [i, v] : fixed) x[i] = v;
  const int m = static_cast<int>(fr.size());
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd b(m);
  for (int r = 0; r < m; ++r) {
    b[r] = rhs[fr[r]] - k.row(fr[r]).dot(x);
    for (int c = 0; c < m; ++c) a(r, c) = k(fr[r], fr[c]);
  }
  const Eigen::VectorXd y = a.fullPivLu().solve(b);
  for (int r = 0; r < m; ++r) x[fr[r]] = y[r];
  EXPECT_LE((u - x).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, x.cwiseAbs().maxCoeff()));
}
