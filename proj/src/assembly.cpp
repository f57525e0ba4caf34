#include <algorithm>
#include <vector>

#include "vilab/errors.hpp"
#include "vilab/fem.hpp"
#include "vilab/parallel.hpp"

namespace vilab {

ReferenceTable make_reference_table(const FESpace& space, const TensorQuadRule& rule) {
  const int p = space.degree();
  const int n1 = p + 1;
  const int nloc = n1 * n1;
  const auto npts = static_cast<Eigen::Index>(rule.size());
  ReferenceTable t;
  t.p = p;
  t.values.resize(npts, nloc);
  t.dxi.resize(npts, nloc);
  t.deta.resize(npts, nloc);
  std::vector<double> lx(n1), dlx(n1), ly(n1), dly(n1);
  for (Eigen::Index k = 0; k < npts; ++k) {
    const auto& pt = rule.points[k];
    t.points.push_back({pt[0], pt[1]});
    t.weights.push_back(rule.weights[k]);
    space.basis().eval(pt[0], lx, dlx);
    space.basis().eval(pt[1], ly, dly);
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n1; ++i) {
        const int a = j * n1 + i;
        t.values(k, a) = lx[i] * ly[j];
        t.dxi(k, a) = dlx[i] * ly[j];
        t.deta(k, a) = lx[i] * dly[j];
      }
  }
  return t;
}

void local_system(const FESpace& space, std::size_t e, const ReferenceTable& table, const ScalarField& a,
                  const ScalarField& f, Eigen::MatrixXd& k_local, Eigen::VectorXd& f_local) {
  const ElementMap& map = space.mesh().elements()[e].map;
  const auto npts = static_cast<Eigen::Index>(table.points.size());
  Eigen::VectorXd wk(npts), wf(npts);
  // Rows of gx/gy hold physical gradients at one quadrature point.
  Eigen::MatrixXd gx(npts, table.values.cols()), gy(npts, table.values.cols());
  for (Eigen::Index k = 0; k < npts; ++k) {
    Point2 x;
    Mat2 jac;
    map.eval(table.points[k], x, jac);
    const double det = jac.det();
    if (!(det > 0.0)) throw GeometryError("assemble: non-positive Jacobian determinant");
    const Mat2 inv = jac.inverse();
    gx.row(k) = inv.m[0][0] * table.dxi.row(k) + inv.m[1][0] * table.deta.row(k);
    gy.row(k) = inv.m[0][1] * table.dxi.row(k) + inv.m[1][1] * table.deta.row(k);
    const double w = table.weights[k] * det;
    wk[k] = w * a(x);
    wf[k] = w * f(x);
  }
  k_local.noalias() = gx.transpose() * wk.asDiagonal() * gx;
  k_local.noalias() += gy.transpose() * wk.asDiagonal() * gy;
  f_local.noalias() = table.values.transpose() * wf;
}

DiscreteObstacleProblem assemble(const FESpace& space, const ScalarField& a, const ScalarField& f,
                                 const ScalarField& psi, int q) {
  if (q < 1) throw PreconditionError("assemble: q must be >= 1");
  const ReferenceTable table = make_reference_table(space, tensor_rule(q));
  const auto n = static_cast<Eigen::Index>(space.num_free());
  const int nloc = space.dofs_per_element();

  DiscreteObstacleProblem prob;
  prob.quad_q = q;
  prob.degree = space.degree();
  prob.load = Eigen::VectorXd::Zero(n);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(space.mesh().num_elements() * static_cast<std::size_t>(nloc * nloc));
  // Local systems are computed in parallel blocks and scattered in element
  // order, so the assembled matrix is independent of the thread count.
  const std::size_t ne = space.mesh().num_elements();
  const std::size_t block = 2048;
  std::vector<Eigen::MatrixXd> k_local(std::min(block, ne));
  std::vector<Eigen::VectorXd> f_local(k_local.size());
  for (std::size_t b0 = 0; b0 < ne; b0 += block) {
    const std::size_t nb = std::min(block, ne - b0);
    parallel_for(nb, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        k_local[i].resize(nloc, nloc);
        f_local[i].resize(nloc);
        local_system(space, b0 + i, table, a, f, k_local[i], f_local[i]);
      }
    });
    for (std::size_t i = 0; i < nb; ++i) {
      const auto& dofs = space.element_dofs(b0 + i);
      for (int r = 0; r < nloc; ++r) {
        const auto& er = space.expansion(dofs[r]);
        if (er.empty()) continue;
        for (const auto& [fi, wi] : er) prob.load[fi] += wi * f_local[i][r];
        for (int c = 0; c < nloc; ++c) {
          const auto& ec = space.expansion(dofs[c]);
          for (const auto& [fi, wi] : er)
            for (const auto& [fj, wj] : ec) triplets.emplace_back(fi, fj, wi * wj * k_local[i](r, c));
        }
      }
    }
  }
  prob.stiffness.resize(n, n);
  prob.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  prob.stiffness.makeCompressed();

  prob.obstacle.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) prob.obstacle[i] = psi(space.node(space.total_index(static_cast<int>(i))));
  return prob;
}

SolutionPoint evaluate_solution(const FESpace& space, const Eigen::VectorXd& coeffs, std::size_t e,
                                const Point2& xhat) {
  if (std::abs(xhat.x) > 1.0 || std::abs(xhat.y) > 1.0)
    throw PreconditionError("evaluate_solution: reference point outside [-1,1]^2");
  if (static_cast<std::size_t>(coeffs.size()) != space.num_total())
    throw PreconditionError("evaluate_solution: expected a total-DOF coefficient vector");
  const int n1 = space.degree() + 1;
  std::vector<double> lx(n1), dlx(n1), ly(n1), dly(n1);
  space.basis().eval(xhat.x, lx, dlx);
  space.basis().eval(xhat.y, ly, dly);
  const auto& dofs = space.element_dofs(e);
  double v = 0, dxi = 0, deta = 0;
  for (int j = 0; j < n1; ++j)
    for (int i = 0; i < n1; ++i) {
      const double c = coeffs[dofs[j * n1 + i]];
      v += c * lx[i] * ly[j];
      dxi += c * dlx[i] * ly[j];
      deta += c * lx[i] * dly[j];
    }
  const Mat2 inv = space.mesh().elements()[e].map.jacobian(xhat).inverse();
  SolutionPoint sp;
  sp.value = v;
  sp.gradient = {inv.m[0][0] * dxi + inv.m[1][0] * deta, inv.m[0][1] * dxi + inv.m[1][1] * deta};
  return sp;
}

}  // namespace vilab
