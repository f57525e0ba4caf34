#include "vilab/study.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <memory>
#include <numeric>
#include <optional>
#include <span>

#include "vilab/errors.hpp"
#include "vilab/parallel.hpp"
#include "vilab/pdas.hpp"

namespace vilab {

ExactRadialSolution::ExactRadialSolution(double r)
    : radius(r), psi_const(-0.5 * (r * r - std::log(r * r) - 1.0)) {
  if (!(r > 1.0)) throw PreconditionError("ExactRadialSolution: radius must exceed 1");
}

double ExactRadialSolution::value(const Point2& x) const {
  const double r2 = x.x * x.x + x.y * x.y;
  if (r2 <= 1.0) return psi_const;
  return 0.5 * (r2 - std::log(r2) - 1.0) + psi_const;
}

Point2 ExactRadialSolution::gradient(const Point2& x) const {
  const double r2 = x.x * x.x + x.y * x.y;
  if (r2 <= 1.0) return {0.0, 0.0};
  const double s = 1.0 - 1.0 / r2;
  return {s * x.x, s * x.y};
}

namespace {

H1Error h1_error_impl(const FESpace& space, const Eigen::VectorXd& coeffs, const GradientField* exact) {
  if (static_cast<std::size_t>(coeffs.size()) != space.num_total())
    throw PreconditionError("h1_error: expected a total-DOF coefficient vector");
  const ReferenceTable table = make_reference_table(space, tensor_rule(space.degree() + 12));
  const Mesh& mesh = space.mesh();
  const auto npts = static_cast<Eigen::Index>(table.points.size());
  const int nloc = space.dofs_per_element();
  H1Error out;
  out.per_element.assign(mesh.num_elements(), 0.0);
  parallel_for(mesh.num_elements(), [&](std::size_t lo, std::size_t hi) {
    Eigen::VectorXd c(nloc);
    for (std::size_t e = lo; e < hi; ++e) {
      const auto& dofs = space.element_dofs(e);
      for (int i = 0; i < nloc; ++i) c[i] = coeffs[dofs[i]];
      const Eigen::VectorXd dxi = table.dxi * c;
      const Eigen::VectorXd deta = table.deta * c;
      const ElementMap& map = mesh.elements()[e].map;
      double sum = 0.0;
      for (Eigen::Index k = 0; k < npts; ++k) {
        Point2 x;
        Mat2 jac;
        map.eval(table.points[k], x, jac);
        const Mat2 inv = jac.inverse();
        Point2 g{inv.m[0][0] * dxi[k] + inv.m[1][0] * deta[k], inv.m[0][1] * dxi[k] + inv.m[1][1] * deta[k]};
        if (exact) g = (*exact)(x) - g;
        sum += table.weights[k] * std::abs(jac.det()) * (g.x * g.x + g.y * g.y);
      }
      out.per_element[e] = sum;
    }
  });
  out.global = std::sqrt(std::accumulate(out.per_element.begin(), out.per_element.end(), 0.0));
  return out;
}

}  // namespace

H1Error h1_error(const FESpace& space, const Eigen::VectorXd& coeffs, const GradientField& exact_gradient) {
  return h1_error_impl(space, coeffs, &exact_gradient);
}

namespace {

constexpr int kCutDepth = 4;

/// True if the circle |x| = 1 passes through the image of the reference
/// cell [a0, a1] x [b0, b1] (sampled on a 9 x 9 grid).
bool cell_is_cut(const ElementMap& map, double a0, double a1, double b0, double b1) {
  bool inside = false, outside = false;
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j <= 8; ++j) {
      const double r = map.eval({a0 + (a1 - a0) * i / 8.0, b0 + (b1 - b0) * j / 8.0}).norm();
      (r <= 1.0 ? inside : outside) = true;
    }
  return inside && outside;
}

/// Cheap prefilter: false if the element lies at least its corner diameter
/// away from |x| = 1.
bool near_unit_circle(const ElementMap& map) {
  const std::array<Point2, 4> c{map.eval({-1, -1}), map.eval({1, -1}), map.eval({1, 1}), map.eval({-1, 1})};
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0, d = 0.0;
  for (int i = 0; i < 4; ++i) {
    rmin = std::min(rmin, c[i].norm());
    rmax = std::max(rmax, c[i].norm());
    for (int j = i + 1; j < 4; ++j) d = std::max(d, (c[i] - c[j]).norm());
  }
  return rmin - d <= 1.0 && rmax + d >= 1.0;
}

/// Integral of |grad u - grad u_h|^2 over a reference cell, subdividing cells
/// cut by the free boundary where the exact gradient has a kink. `c` holds
/// the element's local coefficients.
double cut_cell_integral(const FESpace& space, const Eigen::VectorXd& c, const ElementMap& map,
                         const ExactRadialSolution& exact, const QuadRule1D& rule, double a0, double a1, double b0,
                         double b1, int depth) {
  if (depth < kCutDepth && cell_is_cut(map, a0, a1, b0, b1)) {
    const double am = 0.5 * (a0 + a1), bm = 0.5 * (b0 + b1);
    return cut_cell_integral(space, c, map, exact, rule, a0, am, b0, bm, depth + 1) +
           cut_cell_integral(space, c, map, exact, rule, am, a1, b0, bm, depth + 1) +
           cut_cell_integral(space, c, map, exact, rule, a0, am, bm, b1, depth + 1) +
           cut_cell_integral(space, c, map, exact, rule, am, a1, bm, b1, depth + 1);
  }
  const std::size_t nq = rule.nodes.size();
  const std::size_t n1 = static_cast<std::size_t>(space.degree()) + 1;
  const double sa = 0.5 * (a1 - a0), sb = 0.5 * (b1 - b0);
  std::vector<double> xs(nq), ys(nq), lx(nq * n1), dlx(nq * n1), ly(nq * n1), dly(nq * n1);
  for (std::size_t i = 0; i < nq; ++i) {
    xs[i] = a0 + sa * (rule.nodes[i] + 1.0);
    ys[i] = b0 + sb * (rule.nodes[i] + 1.0);
    space.basis().eval(xs[i], std::span(lx).subspan(i * n1, n1), std::span(dlx).subspan(i * n1, n1));
    space.basis().eval(ys[i], std::span(ly).subspan(i * n1, n1), std::span(dly).subspan(i * n1, n1));
  }
  double sum = 0.0;
  for (std::size_t qj = 0; qj < nq; ++qj)
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const double* vx = &lx[qi * n1];
      const double* dx = &dlx[qi * n1];
      const double* vy = &ly[qj * n1];
      const double* dy = &dly[qj * n1];
      double dxi = 0.0, deta = 0.0;
      for (std::size_t j = 0; j < n1; ++j)
        for (std::size_t i = 0; i < n1; ++i) {
          const double ci = c[static_cast<Eigen::Index>(j * n1 + i)];
          dxi += ci * dx[i] * vy[j];
          deta += ci * vx[i] * dy[j];
        }
      Point2 x;
      Mat2 jac;
      map.eval({xs[qi], ys[qj]}, x, jac);
      const Mat2 inv = jac.inverse();
      const Point2 gh{inv.m[0][0] * dxi + inv.m[1][0] * deta, inv.m[0][1] * dxi + inv.m[1][1] * deta};
      const Point2 g = exact.gradient(x) - gh;
      sum += rule.weights[qi] * rule.weights[qj] * sa * sb * std::abs(jac.det()) * (g.x * g.x + g.y * g.y);
    }
  return sum;
}

}  // namespace

H1Error h1_error(const FESpace& space, const Eigen::VectorXd& coeffs, const ExactRadialSolution& exact) {
  const GradientField g = [&](const Point2& x) { return exact.gradient(x); };
  H1Error out = h1_error_impl(space, coeffs, &g);
  // Elements cut by |x| = 1 get a composite rule refined towards the kink.
  const QuadRule1D rule = gauss_legendre(space.degree() + 12);
  const auto& elements = space.mesh().elements();
  parallel_for(elements.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t e = lo; e < hi; ++e)
      if (near_unit_circle(elements[e].map) && cell_is_cut(elements[e].map, -1.0, 1.0, -1.0, 1.0)) {
        const auto& dofs = space.element_dofs(e);
        Eigen::VectorXd c(static_cast<Eigen::Index>(dofs.size()));
        for (std::size_t i = 0; i < dofs.size(); ++i) c[static_cast<Eigen::Index>(i)] = coeffs[dofs[i]];
        out.per_element[e] = cut_cell_integral(space, c, elements[e].map, exact, rule, -1.0, 1.0, -1.0, 1.0, 0);
      }
  });
  out.global = std::sqrt(std::accumulate(out.per_element.begin(), out.per_element.end(), 0.0));
  return out;
}

H1Error h1_error(const FESpace& space, const Eigen::VectorXd& coeffs, const FESpace& ref_space,
                 const Eigen::VectorXd& ref_coeffs) {
  const bool same = &space == &ref_space ||
                    (space.mesh_ptr() == ref_space.mesh_ptr() && space.degree() == ref_space.degree());
  if (!same) throw PreconditionError("h1_error: the two functions live on different spaces");
  if (coeffs.size() != ref_coeffs.size()) throw PreconditionError("h1_error: coefficient vectors differ in size");
  return h1_error_impl(space, ref_coeffs - coeffs, nullptr);
}

std::vector<int> dorfler_mark(const std::vector<double>& eta_sq, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw PreconditionError("dorfler_mark: theta must lie in (0, 1]");
  std::vector<int> order(eta_sq.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta_sq[a] > eta_sq[b]; });
  const double total = std::accumulate(eta_sq.begin(), eta_sq.end(), 0.0);
  std::vector<int> marked;
  if (!(total > 0.0)) return marked;
  // Relative slack absorbs summation-order rounding (theta = 1).
  const double target = theta * total * (1.0 - 1e-14);
  double sum = 0.0;
  for (int i : order) {
    if (sum >= target || !(eta_sq[i] > 0.0)) break;
    sum += eta_sq[i];
    marked.push_back(i);
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

double eoc_fit(const std::vector<double>& n, const std::vector<double>& err, int window) {
  if (n.size() != err.size()) throw PreconditionError("eoc_fit: size mismatch");
  if (window < 2) throw PreconditionError("eoc_fit: window must be >= 2");
  if (n.size() < 2) throw UndefinedRateError("eoc: fewer than two usable records");
  const std::size_t b = n.size() - std::min<std::size_t>(n.size(), static_cast<std::size_t>(window));
  const std::size_t m = n.size() - b;
  double mx = 0, my = 0;
  for (std::size_t i = b; i < n.size(); ++i) {
    mx += std::log(n[i]);
    my += std::log(err[i]);
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0, sxy = 0;
  for (std::size_t i = b; i < n.size(); ++i) {
    const double dx = std::log(n[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(err[i]) - my);
  }
  if (!(sxx > 0.0)) throw UndefinedRateError("eoc: degrees of freedom do not vary");
  return -sxy / sxx;
}

double eoc(const std::vector<ConvergenceRecord>& records, RecordField field, int window) {
  std::vector<double> n, e;
  for (const auto& r : records) {
    const double v = field == RecordField::Total ? r.err_total : r.err_quad;
    if (r.failed || !std::isfinite(v) || !(v > 0.0)) continue;
    if (field == RecordField::Quad && r.quad_floor) continue;
    n.push_back(static_cast<double>(r.N));
    e.push_back(v);
  }
  return eoc_fit(n, e, window);
}

const char* to_string(StudyMode mode) {
  switch (mode) {
    case StudyMode::HUniform: return "h-uniform";
    case StudyMode::HAdaptive: return "h-adaptive";
    case StudyMode::PUniform: return "p-uniform";
  }
  return "?";
}

StudyMode parse_mode(const std::string& s) {
  if (s == "h-uniform") return StudyMode::HUniform;
  if (s == "h-adaptive") return StudyMode::HAdaptive;
  if (s == "p-uniform") return StudyMode::PUniform;
  throw PreconditionError("unknown study mode '" + s + "'");
}

const std::vector<ConvergenceRecord>& CampaignResult::for_offset(int j) const {
  for (std::size_t i = 0; i < config.q_offsets.size(); ++i)
    if (config.q_offsets[i] == j) return records[i];
  throw PreconditionError("CampaignResult: offset not part of the campaign");
}

std::vector<int> transfer_active_guess(const FESpace& old_space, const Eigen::VectorXd& old_total,
                                       const FESpace& space, const Eigen::VectorXd& obstacle, bool same_mesh) {
  const Mesh& mesh = space.mesh();
  const int n1 = space.degree() + 1;
  const auto& xi = space.reference_nodes();
  std::vector<signed char> state(space.num_free(), -1);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements()[e];
    const std::size_t pe = same_mesh ? e : static_cast<std::size_t>(el.parent);
    if (pe >= old_space.mesh().num_elements()) throw PreconditionError("transfer_active_guess: unrelated meshes");
    const double s = same_mesh ? 1.0 : el.sub_scale;
    const Point2 o = same_mesh ? Point2{0.0, 0.0} : el.sub_offset;
    const auto& dofs = space.element_dofs(e);
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n1; ++i) {
        const int fi = space.free_index(dofs[j * n1 + i]);
        if (fi < 0 || state[fi] >= 0) continue;
        const Point2 xo{std::clamp(o.x + s * xi[i], -1.0, 1.0), std::clamp(o.y + s * xi[j], -1.0, 1.0)};
        const double v = evaluate_solution(old_space, old_total, pe, xo).value;
        state[fi] = v <= obstacle[fi] + 1e-9 * std::max(1.0, std::abs(obstacle[fi])) ? 1 : 0;
      }
  }
  std::vector<int> active;
  for (std::size_t i = 0; i < state.size(); ++i)
    if (state[i] == 1) active.push_back(static_cast<int>(i));
  return active;
}

CampaignResult run_campaign(const StudyConfig& config) {
  if (config.p < 1) throw PreconditionError("run_campaign: p must be >= 1");
  if (config.levels < 1) throw PreconditionError("run_campaign: levels must be >= 1");
  if (!(config.theta > 0.0 && config.theta <= 1.0)) throw PreconditionError("run_campaign: theta must lie in (0, 1]");
  if (config.q_offsets.empty()) throw PreconditionError("run_campaign: no quadrature offsets");

  const ExactRadialSolution exact(config.radius);
  const double psi = exact.psi_const;
  const ScalarField a_field = [](const Point2&) { return ExactRadialSolution::a; };
  const ScalarField f_field = [](const Point2&) { return ExactRadialSolution::f; };
  const ScalarField psi_field = [psi](const Point2&) { return psi; };

  CampaignResult result;
  result.config = config;
  result.records.resize(config.q_offsets.size());

  Mesh mesh = build_initial_disk_mesh(config.radius);
  int p = config.p;
  int n_levels = config.levels;
  if (config.mode == StudyMode::PUniform) {
    for (int l = 0; l < config.p_mesh_level; ++l) mesh = refine_uniform(mesh);
    p = 1;
    n_levels = config.p;
  }

  std::shared_ptr<FESpace> prev_space;
  Eigen::VectorXd prev_ref;
  for (int level = 0; level < n_levels; ++level) {
    auto mesh_ptr = std::make_shared<const Mesh>(mesh);
    auto space = std::make_shared<FESpace>(mesh_ptr, p);
    const std::size_t n_free = space->num_free();
    if (n_free > config.max_dofs) break;
    const double h = mesh.max_diameter();

    const DiscreteObstacleProblem ref_prob = assemble(*space, a_field, f_field, psi_field, p + kReferenceOffset);
    PdasOptions ref_opt;
    ref_opt.verbose = config.verbose;
    if (prev_space)
      ref_opt.initial_active = transfer_active_guess(*prev_space, prev_ref, *space, ref_prob.obstacle,
                                                     config.mode == StudyMode::PUniform);
    const PdasState ref = pdas_solve(ref_prob, config.tol, config.max_iter, ref_opt);
    const Eigen::VectorXd ref_total = space->expand(ref.u);
    H1Error ref_err = h1_error(*space, ref_total, exact);
    const double ref_norm = std::sqrt(ref.u.dot(ref_prob.stiffness * ref.u));

    for (std::size_t oi = 0; oi < config.q_offsets.size(); ++oi) {
      const int j = config.q_offsets[oi];
      ConvergenceRecord rec;
      rec.level = config.mode == StudyMode::PUniform ? p : level;
      rec.N = n_free;
      rec.h = h;
      rec.degree = p;
      rec.quad_q = p + j;
      if (j == kReferenceOffset) {
        rec.err_total = ref_err.global;
        rec.err_quad = 0.0;
        rec.quad_floor = true;
        rec.pdas_iterations = ref.iteration;
        rec.per_element = ref_err.per_element;
      } else if (p + j < 1) {
        rec.failed = true;
      } else {
        try {
          const DiscreteObstacleProblem prob = assemble(*space, a_field, f_field, psi_field, p + j);
          PdasOptions opt;
          opt.verbose = config.verbose;
          opt.initial_active = ref.active;
          const PdasState st = pdas_solve(prob, config.tol, config.max_iter, opt);
          const Eigen::VectorXd total = space->expand(st.u);
          H1Error err = h1_error(*space, total, exact);
          rec.err_total = err.global;
          rec.per_element = std::move(err.per_element);
          rec.err_quad = h1_error(*space, total, *space, ref_total).global;
          rec.quad_floor = rec.err_quad < 1e-12 * ref_norm;
          rec.pdas_iterations = st.iteration;
        } catch (const DefinitenessError&) {
          rec.failed = true;
        } catch (const SolverFailure&) {
          rec.failed = true;
        }
      }
      auto& recs = result.records[oi];
      recs.push_back(std::move(rec));
      try {
        recs.back().eoc_total = eoc(recs, RecordField::Total);
      } catch (const UndefinedRateError&) {
      }
      try {
        recs.back().eoc_quad = eoc(recs, RecordField::Quad);
      } catch (const UndefinedRateError&) {
      }
      if (config.verbose) {
        const auto& r = recs.back();
        std::fprintf(stderr, "%s p=%d j=%d level %d N=%zu err_total=%.6e err_quad=%.6e%s\n",
                     to_string(config.mode), p, j, r.level, r.N, r.err_total, r.err_quad, r.failed ? " FAILED" : "");
      }
    }

    prev_space = space;
    prev_ref = ref_total;
    switch (config.mode) {
      case StudyMode::HUniform: mesh = refine_uniform(mesh); break;
      case StudyMode::HAdaptive: mesh = refine_adaptive(mesh, dorfler_mark(ref_err.per_element, config.theta)); break;
      case StudyMode::PUniform: ++p; break;
    }
  }
  return result;
}

std::string campaign_file_name(StudyMode mode, int p, int j) {
  const char* tag = mode == StudyMode::HUniform ? "h" : mode == StudyMode::HAdaptive ? "a" : "p";
  return std::string(tag) + std::to_string(p) + "_j" + std::to_string(j) + ".csv";
}

void write_campaign_csv(const std::string& path, const std::vector<ConvergenceRecord>& records) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::fprintf(f, "level,N,h,err_total,err_quad,eoc_total,eoc_quad\n");
  for (const auto& r : records)
    std::fprintf(f, "%d,%zu,%.16e,%.16e,%.16e,%.16e,%.16e\n", r.level, r.N, r.h, r.err_total, r.err_quad,
                 r.eoc_total, r.eoc_quad);
  std::fclose(f);
}

void write_loglog_csv(const std::string& path, const std::vector<ConvergenceRecord>& records) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::fprintf(f, "log10_N,log10_err_total,log10_err_quad\n");
  for (const auto& r : records) {
    if (r.failed) continue;
    const double q = (r.quad_floor || !(r.err_quad > 0.0)) ? std::nan("") : std::log10(r.err_quad);
    std::fprintf(f, "%.16e,%.16e,%.16e\n", std::log10(static_cast<double>(r.N)), std::log10(r.err_total), q);
  }
  std::fclose(f);
}

}  // namespace vilab
