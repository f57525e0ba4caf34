#include "vilab/abstract_vi.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

#include "vilab/errors.hpp"
#include "vilab/pdas.hpp"

namespace vilab {

namespace {

double min_sym_eig(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

double spectral_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()[0];
}

Eigen::VectorXd normal_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

// u_A = psi_A, (A u - l)_i = 0 elsewhere.
Eigen::VectorXd solve_with_active(const DenseVIInstance& inst, const std::vector<char>& active) {
  const Eigen::Index n = inst.dim();
  std::vector<int> fr;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (active[i])
      u[i] = inst.psi[i];
    else
      fr.push_back(static_cast<int>(i));
  }
  if (fr.empty()) return u;
  const auto m = static_cast<Eigen::Index>(fr.size());
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd b(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    b[r] = inst.ell[fr[r]] - inst.A.row(fr[r]).dot(u);
    for (Eigen::Index c = 0; c < m; ++c) a(r, c) = inst.A(fr[r], fr[c]);
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd x = lu.solve(b);
  x += lu.solve(b - a * x);
  for (Eigen::Index r = 0; r < m; ++r) u[fr[r]] = x[r];
  return u;
}

DenseVISolution finish(const DenseVIInstance& inst, Eigen::VectorXd u, std::vector<int> active, bool fallback) {
  DenseVISolution s;
  const Eigen::VectorXd grad = inst.A * u - inst.ell;
  s.lambda = Eigen::VectorXd::Zero(inst.dim());
  for (int i : inst.constrained) s.lambda[i] = grad[i];
  s.u = std::move(u);
  s.active = std::move(active);
  s.used_fallback = fallback;
  return s;
}

}  // namespace

std::vector<char> DenseVIInstance::constrained_mask() const {
  std::vector<char> mask(dim(), 0);
  for (int i : constrained) mask[i] = 1;
  return mask;
}

double DenseVIInstance::alpha() const { return min_sym_eig(A); }
double DenseVIInstance::continuity() const { return spectral_norm(A); }

bool DenseVIInstance::contains(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) return false;
  for (int i : constrained)
    if (v[i] < psi[i]) return false;
  return true;
}

Eigen::VectorXd DenseVIInstance::project(const Eigen::VectorXd& v) const {
  Eigen::VectorXd p = v;
  for (int i : constrained) p[i] = std::max(p[i], psi[i]);
  return p;
}

DenseVISolution solve_dense_vi_pivoting(const DenseVIInstance& inst, double tol) {
  const Eigen::Index n = inst.dim();
  const double thr = tol * std::max(1.0, inst.ell.norm());
  std::vector<char> active(n, 0);
  const int guard = 1 << std::min<int>(20, static_cast<int>(inst.constrained.size()) + 4);
  Eigen::VectorXd u;
  for (int it = 0; it < guard; ++it) {
    u = solve_with_active(inst, active);
    const Eigen::VectorXd w = inst.A * u - inst.ell;
    int flip = -1;
    for (int i : inst.constrained) {
      if ((active[i] && w[i] < -thr) || (!active[i] && u[i] - inst.psi[i] < -thr)) {
        flip = i;
        break;
      }
    }
    if (flip < 0) {
      std::vector<int> act;
      for (Eigen::Index i = 0; i < n; ++i)
        if (active[i]) act.push_back(static_cast<int>(i));
      return finish(inst, u, act, true);
    }
    active[flip] = !active[flip];
  }
  throw SolverFailure("principal pivoting did not terminate", std::vector<double>(u.data(), u.data() + u.size()));
}

DenseVISolution solve_dense_vi(const DenseVIInstance& inst, double tol, int max_iter) {
  const Eigen::Index n = inst.dim();
  if (inst.A.cols() != n || inst.ell.size() != n || inst.psi.size() != n)
    throw PreconditionError("solve_dense_vi: size mismatch");
  if (!(tol > 0.0)) throw PreconditionError("solve_dense_vi: tol must be positive");
  if (!(inst.alpha() > 0.0)) throw PreconditionError("solve_dense_vi: A is not positive definite");
  const double scale = std::max(inst.ell.norm(), 1e-300);
  try {
    PdasState st = pdas_solve_dense(inst.A, inst.ell, inst.psi, inst.constrained_mask(), tol / scale, max_iter);
    return finish(inst, std::move(st.u), std::move(st.active), false);
  } catch (const SolverFailure&) {
    return solve_dense_vi_pivoting(inst, tol);
  }
}

DenseVIInstance PerturbedPair::perturbed() const {
  DenseVIInstance t;
  t.A = A_tilde;
  t.ell = ell_tilde;
  t.psi = psi_tilde;
  t.constrained = base.constrained;
  return t;
}

PerturbedPair make_perturbed_pair(DenseVIInstance base, Eigen::MatrixXd a_tilde, Eigen::VectorXd ell_tilde,
                                  Eigen::VectorXd psi_tilde) {
  const Eigen::Index n = base.dim();
  if (a_tilde.rows() != n || a_tilde.cols() != n || ell_tilde.size() != n || psi_tilde.size() != n)
    throw PreconditionError("make_perturbed_pair: size mismatch");
  PerturbedPair p;
  p.alpha_tilde = min_sym_eig(a_tilde);
  if (!(p.alpha_tilde > 0.0)) throw PreconditionError("make_perturbed_pair: perturbed operator is not elliptic");
  p.base = std::move(base);
  p.A_tilde = std::move(a_tilde);
  p.ell_tilde = std::move(ell_tilde);
  p.psi_tilde = std::move(psi_tilde);
  return p;
}

BoundReport make_report(double lhs, double rhs) {
  BoundReport r;
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = rhs - lhs;
  r.holds = r.margin >= -kBoundTolRel * rhs;
  return r;
}

double strang_falk_rhs(const PerturbedPair& pair, const Eigen::VectorXd& u, const Eigen::VectorXd& u_tilde,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& v_tilde) {
  const DenseVIInstance& b = pair.base;
  if (!b.contains(v)) throw PreconditionError("strang_falk_rhs: v is not in K");
  if (!pair.perturbed().contains(v_tilde)) throw PreconditionError("strang_falk_rhs: v_tilde is not in K~");
  const double c = b.continuity();
  const double at = pair.alpha_tilde;
  const Eigen::VectorXd res = b.A * u - b.ell;
  const double consistency = ((b.A - pair.A_tilde) * v_tilde - (b.ell - pair.ell_tilde)).squaredNorm();
  return (2.0 + 4.0 * c * c / (at * at)) * (u - v_tilde).squaredNorm() +
         (4.0 / at) * res.dot(v_tilde - u + v - u_tilde) + (4.0 / (at * at)) * consistency;
}

double corollary_pert_rhs(const PerturbedPair& pair, const Eigen::VectorXd& u, const Eigen::VectorXd& u_star,
                          const Eigen::VectorXd& u_tilde, const Eigen::VectorXd& v, const Eigen::VectorXd& v_tilde) {
  (void)u_tilde;
  const DenseVIInstance& b = pair.base;
  if (!b.contains(v)) throw PreconditionError("corollary_pert_rhs: v is not in K");
  if (!pair.perturbed().contains(v_tilde)) throw PreconditionError("corollary_pert_rhs: v_tilde is not in K~");
  const double c = b.continuity();
  const double a = b.alpha();
  const double at = pair.alpha_tilde;
  const Eigen::VectorXd res = b.A * u - b.ell;
  const double consistency = ((b.A - pair.A_tilde) * u_star - (b.ell - pair.ell_tilde)).squaredNorm();
  return (4.0 + 8.0 * c * c / (a * a)) * (u - v_tilde).squaredNorm() + (8.0 / a) * res.dot(v_tilde - u + v - u_star) +
         (8.0 / (at * at)) * consistency;
}

ConstrainedConstants constrained_constants(const ConstrainedVIInstance& inst) {
  ConstrainedConstants k;
  k.c_D = spectral_norm(inst.D);
  k.alpha_D = min_sym_eig(inst.D);
  k.c_B = spectral_norm(inst.B);
  k.c_Bt = spectral_norm(inst.B.transpose());
  k.c_C = spectral_norm(inst.C);
  k.alpha_C = min_sym_eig(inst.C);
  const double aC = k.alpha_C, aD = k.alpha_D;
  const double t = k.c_D * aC + k.c_B * k.c_B;
  k.C0 = 2.0 + 4.0 * t * t / ((aC * aD) * (aC * aD)) + 2.0 * (k.c_Bt * aC + k.c_B) / aC;
  const double f = 1.0 + 2.0 * k.c_B / aC;
  k.C1 = f * k.C0;
  k.C2 = f * (2.0 + (2.0 * k.c_C + k.c_Bt * k.c_C) / aC);
  k.C3 = f * 4.0 / (aD * aD);
  return k;
}

DenseVIInstance condense(const ConstrainedVIInstance& inst) {
  Eigen::LLT<Eigen::MatrixXd> llt(inst.C);
  if (llt.info() != Eigen::Success || !(min_sym_eig(inst.C) > 0.0))
    throw PreconditionError("condense: C is not symmetric positive definite");
  DenseVIInstance out;
  out.A = inst.D + inst.B.transpose() * llt.solve(inst.B);
  out.ell = inst.f + inst.B.transpose() * llt.solve(inst.g);
  out.psi = inst.psi;
  out.constrained.resize(inst.D.rows());
  for (Eigen::Index i = 0; i < inst.D.rows(); ++i) out.constrained[i] = static_cast<int>(i);
  return out;
}

Eigen::MatrixXd galerkin_inverse(const ConstrainedVIInstance& inst) {
  const Eigen::MatrixXd& p = inst.subspace_basis;
  const Eigen::Index m = inst.C.rows();
  if (p.cols() == 0) return Eigen::MatrixXd::Zero(m, m);
  if (p.rows() != m) throw PreconditionError("galerkin_inverse: basis has wrong row count");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p);
  if (qr.rank() < p.cols()) throw PreconditionError("galerkin_inverse: basis is rank deficient");
  Eigen::LLT<Eigen::MatrixXd> llt(p.transpose() * inst.C * p);
  if (llt.info() != Eigen::Success) throw PreconditionError("galerkin_inverse: P^T C P is not SPD");
  return p * llt.solve(p.transpose());
}

PerturbedPair galerkin_condense(const ConstrainedVIInstance& inst) {
  DenseVIInstance base = condense(inst);
  const Eigen::MatrixXd ct = galerkin_inverse(inst);
  Eigen::MatrixXd at = inst.D + inst.B.transpose() * ct * inst.B;
  Eigen::VectorXd lt = inst.f + inst.B.transpose() * ct * inst.g;
  Eigen::VectorXd pt = inst.psi_tilde ? *inst.psi_tilde : inst.psi;
  return make_perturbed_pair(std::move(base), std::move(at), std::move(lt), std::move(pt));
}

Eigen::VectorXd recover_multiplier(const ConstrainedVIInstance& inst, const Eigen::VectorXd& u) {
  return inst.C.llt().solve(inst.B * u - inst.g);
}

SaddleSolution solve_saddle(const ConstrainedVIInstance& inst, bool galerkin, double tol) {
  const Eigen::Index n = inst.D.rows();
  const Eigen::Index m = inst.C.rows();
  const Eigen::MatrixXd q = galerkin ? inst.subspace_basis : Eigen::MatrixXd::Identity(m, m);
  const Eigen::Index r = q.cols();
  const Eigen::VectorXd psi = (galerkin && inst.psi_tilde) ? *inst.psi_tilde : inst.psi;
  const Eigen::MatrixXd bq = inst.B.transpose() * q;  // n x r

  Eigen::MatrixXd kkt(n + r, n + r);
  kkt << inst.D, bq, bq.transpose(), -(q.transpose() * inst.C * q);
  Eigen::VectorXd rhs(n + r);
  rhs << inst.f, q.transpose() * inst.g;

  auto solve_active = [&](const std::vector<char>& active) {
    Eigen::MatrixXd k = kkt;
    Eigen::VectorXd b = rhs;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[i]) continue;
      k.row(i).setZero();
      k(i, i) = 1.0;
      b[i] = psi[i];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    Eigen::VectorXd x = lu.solve(b);
    x += lu.solve(b - k * x);
    return x;
  };
  auto make = [&](const Eigen::VectorXd& x) {
    SaddleSolution s;
    s.u = x.head(n);
    s.lambda = q * x.tail(r);
    return s;
  };

  const double thr = tol * std::max(1.0, rhs.norm());
  std::vector<char> active(n, 0);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd x = solve_active(active);
    const Eigen::VectorXd w = (kkt * x - rhs).head(n);
    std::vector<char> next(n, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lam = active[i] ? w[i] : 0.0;
      next[i] = lam + (psi[i] - x[i]) > 0.0;
    }
    if (next == active) {
      bool ok = true;
      for (Eigen::Index i = 0; i < n; ++i)
        ok = ok && (active[i] ? w[i] >= -thr : (x[i] >= psi[i] - thr && std::abs(w[i]) <= thr));
      if (ok) return make(x);
      break;
    }
    active = std::move(next);
  }
  // Active-set iteration cycled: take the contact set from the condensed VI.
  DenseVIInstance red;
  if (galerkin) {
    red = galerkin_condense(inst).perturbed();
  } else {
    red = condense(inst);
  }
  const DenseVISolution sol = solve_dense_vi_pivoting(red, tol);
  std::fill(active.begin(), active.end(), 0);
  for (int i : sol.active) active[i] = 1;
  return make(solve_active(active));
}

std::vector<BoundReport> verify_constrained_bound(const ConstrainedVIInstance& inst, int trials, std::uint64_t seed) {
  const ConstrainedConstants k = constrained_constants(inst);
  const SaddleSolution ex = solve_saddle(inst, false);
  const SaddleSolution dis = solve_saddle(inst, true);
  const Eigen::VectorXd psi_t = inst.psi_tilde ? *inst.psi_tilde : inst.psi;
  const Eigen::MatrixXd& p = inst.subspace_basis;
  const Eigen::Index n = inst.D.rows();

  Eigen::VectorXd mu_best = Eigen::VectorXd::Zero(inst.C.rows());
  if (p.cols() > 0) mu_best = p * (p.transpose() * p).ldlt().solve(p.transpose() * ex.lambda);
  const Eigen::VectorXd res = inst.D * ex.u + inst.B.transpose() * ex.lambda - inst.f;
  const double lhs = (ex.u - dis.u).squaredNorm() + (ex.lambda - dis.lambda).squaredNorm();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> expo(-3.0, 0.0);
  std::vector<BoundReport> out;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd vt = ex.u, v = dis.u, mt = mu_best;
    if (t > 0) {
      const double s = std::pow(10.0, expo(rng)) * (1.0 + ex.u.norm());
      vt += s * normal_vector(n, rng);
      v += s * normal_vector(n, rng);
      if (p.cols() > 0) mt += s * p * normal_vector(p.cols(), rng);
    }
    vt = vt.cwiseMax(psi_t);
    v = v.cwiseMax(inst.psi);
    const double rhs = k.C1 * (ex.u - vt).squaredNorm() + k.C2 * (ex.lambda - mt).squaredNorm() +
                       k.C3 * res.dot(vt - ex.u + v - dis.u);
    BoundReport r = make_report(lhs, rhs);
    r.constants = {k.C0, k.C1, k.C2, k.C3};
    out.push_back(r);
  }
  return out;
}

Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng, double shift) {
  const Eigen::MatrixXd m = normal_matrix(n, n, rng);
  return m.transpose() * m + shift * Eigen::MatrixXd::Identity(n, n);
}

DenseVIInstance random_instance(Eigen::Index n, std::mt19937_64& rng) {
  DenseVIInstance inst;
  inst.A = random_spd(n, rng);
  inst.ell = normal_vector(n, rng);
  inst.psi = normal_vector(n, rng);
  std::bernoulli_distribution coin(0.75);
  for (Eigen::Index i = 0; i < n; ++i)
    if (coin(rng)) inst.constrained.push_back(static_cast<int>(i));
  return inst;
}

PerturbedPair random_pair(const DenseVIInstance& base, double eps, std::mt19937_64& rng) {
  const Eigen::Index n = base.dim();
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::MatrixXd e = normal_matrix(n, n, rng);
    e /= spectral_norm(e);
    Eigen::VectorXd dl = normal_vector(n, rng);
    Eigen::VectorXd dp = normal_vector(n, rng);
    try {
      return make_perturbed_pair(base, base.A + eps * e, base.ell + eps * dl.normalized(),
                                 base.psi + eps * dp.normalized());
    } catch (const PreconditionError&) {
    }
  }
  throw PreconditionError("random_pair: could not draw an elliptic perturbation");
}

ConstrainedVIInstance random_constrained(Eigen::Index n, Eigen::Index m, Eigen::Index k, std::mt19937_64& rng) {
  ConstrainedVIInstance inst;
  inst.D = random_spd(n, rng);
  inst.B = normal_matrix(m, n, rng);
  inst.C = random_spd(m, rng);
  inst.f = normal_vector(n, rng);
  inst.g = normal_vector(m, rng);
  inst.psi = normal_vector(n, rng);
  inst.subspace_basis = normal_matrix(m, k, rng);
  return inst;
}

bool AbstractSuiteResult::all_hold() const {
  auto ok = [](const std::vector<BoundReport>& v) {
    return std::all_of(v.begin(), v.end(), [](const BoundReport& r) { return r.holds; });
  };
  return ok(strang) && ok(corollary) && ok(lipschitz);
}

AbstractSuiteResult run_abstract_suite(int trials, std::uint64_t seed, int samples) {
  AbstractSuiteResult out;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(t));
    std::uniform_int_distribution<int> dim(1, 20);
    const Eigen::Index n = dim(rng);
    const DenseVIInstance base = random_instance(n, rng);
    const PerturbedPair pair = random_pair(base, (t % 2 == 0) ? 1e-1 : 1e-3, rng);
    const DenseVIInstance pert = pair.perturbed();
    DenseVIInstance star = base;
    star.psi = pair.psi_tilde;

    const DenseVISolution su = solve_dense_vi(base);
    const DenseVISolution st = solve_dense_vi(pert);
    const DenseVISolution ss = solve_dense_vi(star);
    out.fallbacks += su.used_fallback + st.used_fallback + ss.used_fallback;
    const Eigen::VectorXd &u = su.u, &ut = st.u, &us = ss.u;
    const double lhs = (u - ut).squaredNorm();

    std::uniform_real_distribution<double> expo(-3.0, 0.5);
    for (int s = 0; s <= samples; ++s) {
      Eigen::VectorXd v = ut, vt = u;
      if (s > 0) {
        const double scale = std::pow(10.0, expo(rng));
        v += scale * normal_vector(n, rng);
        vt += scale * normal_vector(n, rng);
      }
      v = base.project(v);
      vt = pert.project(vt);
      out.strang.push_back(make_report(lhs, strang_falk_rhs(pair, u, ut, v, vt)));
      out.corollary.push_back(make_report(lhs, corollary_pert_rhs(pair, u, us, ut, v, vt)));
    }

    DenseVIInstance other = base;
    other.ell = base.ell + std::pow(10.0, expo(rng)) * normal_vector(n, rng);
    const DenseVISolution so = solve_dense_vi(other);
    out.fallbacks += so.used_fallback;
    out.lipschitz.push_back(make_report((u - so.u).norm(), 2.0 / base.alpha() * (base.ell - other.ell).norm()));
  }
  return out;
}

bool ConstrainedSuiteResult::all_hold() const {
  return max_saddle_gap <= 1e-10 && max_equality_residual <= 1e-10 && min_ellipticity_margin >= -1e-10 &&
         min_psd_eig >= -1e-10 && max_norm_excess <= 1e-10 &&
         std::all_of(reports.begin(), reports.end(), [](const BoundReport& r) { return r.holds; });
}

ConstrainedSuiteResult run_constrained_suite(int trials, std::uint64_t seed, int samples) {
  ConstrainedSuiteResult out;
  out.min_ellipticity_margin = std::numeric_limits<double>::infinity();
  out.min_psd_eig = std::numeric_limits<double>::infinity();
  out.max_norm_excess = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(t);
    std::mt19937_64 rng(s);
    std::uniform_int_distribution<int> dim(2, 12);
    const Eigen::Index n = dim(rng), m = dim(rng);
    const ConstrainedVIInstance inst = random_constrained(n, m, m / 2, rng);
    const ConstrainedConstants k = constrained_constants(inst);

    const SaddleSolution direct = solve_saddle(inst, false);
    const DenseVIInstance red = condense(inst);
    const DenseVISolution sol = solve_dense_vi(red);
    const Eigen::VectorXd lam = recover_multiplier(inst, sol.u);
    out.max_saddle_gap = std::max({out.max_saddle_gap, (direct.u - sol.u).lpNorm<Eigen::Infinity>(),
                                   (direct.lambda - lam).lpNorm<Eigen::Infinity>()});
    out.max_equality_residual = std::max(out.max_equality_residual, (inst.B * sol.u - inst.C * lam - inst.g).norm());
    out.min_ellipticity_margin = std::min(out.min_ellipticity_margin, min_sym_eig(red.A) - k.alpha_D);

    const Eigen::MatrixXd ct = galerkin_inverse(inst);
    out.min_psd_eig = std::min({out.min_psd_eig, min_sym_eig(ct),
                                min_sym_eig(inst.B.transpose() * ct * inst.B)});
    out.max_norm_excess = std::max(out.max_norm_excess, spectral_norm(ct) - 1.0 / k.alpha_C);

    const auto reps = verify_constrained_bound(inst, samples + 1, s);
    out.reports.insert(out.reports.end(), reps.begin(), reps.end());
  }
  return out;
}

}  // namespace vilab
