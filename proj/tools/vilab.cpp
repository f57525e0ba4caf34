// Command-line front end: single solves, campaigns, spectra, bound suites and
// quadrature tables. Exit codes: 0 success, 1 failed check, 2 usage error.

#include <CLI11.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vilab/abstract_vi.hpp"
#include "vilab/errors.hpp"
#include "vilab/fem.hpp"
#include "vilab/io.hpp"
#include "vilab/linear_solver.hpp"
#include "vilab/mesh.hpp"
#include "vilab/parallel.hpp"
#include "vilab/pdas.hpp"
#include "vilab/quadrature.hpp"
#include "vilab/study.hpp"

namespace fs = std::filesystem;
using namespace vilab;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Options {
  std::string config;
  std::string out_dir = "out";
  int threads = 0;
  bool verbose = false;
  std::uint64_t seed = 7;

  std::string mode = "h-uniform";
  int p = 1;
  std::vector<int> q_offsets;
  std::vector<int> q;
  int levels = -1;
  double theta = 0.5;
  double radius = 1.5;
  double tol = 1e-10;
  int max_iter = 100;
  int trials = -1;
  std::size_t max_dofs = 350000;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool truthy(const std::string& v) { return v == "1" || v == "true" || v == "on" || v == "yes"; }

/// Flat key=value file; '#' starts a comment. Keys are flag names without
/// the leading dashes.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CLI::FileError::Missing(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("config", path + ":" + std::to_string(lineno) + ": expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

/// Appends config entries whose flag does not already appear on the command
/// line, so flags win over the file.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    std::string key = a.substr(2);
    if (auto eq = key.find('='); eq != std::string::npos) {
      if (key.substr(0, eq) == "config") path = key.substr(eq + 1);
      key.resize(eq);
    } else if (key == "config" && i + 1 < args.size()) {
      path = args[i + 1];
    }
    given.insert(key);
  }
  std::vector<std::string> out = args;
  if (path.empty()) return out;
  for (const auto& [key, value] : read_config(path)) {
    if (given.count(key)) continue;
    if (key == "verbose") {
      if (truthy(value)) out.push_back("--verbose");
      continue;
    }
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

void write_manifest(const Options& o, const CLI::App& sub) {
  std::ostringstream m;
  m << "subcommand=" << sub.get_name() << '\n';
  m << "vilab_version=" << kVersion << '\n';
  m << "eigen_version=" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
  m << "sparse_backend=" << SparseCholesky::backend() << '\n';
  m << "config_file=" << o.config << '\n';
  m << "seed=" << o.seed << '\n';
  m << "threads=" << o.threads << '\n';
  m << sub.config_to_str(true, false);
  write_file((fs::path(o.out_dir) / "manifest.txt").string(), m.str());
}

void add_common(CLI::App* s, Options& o) {
  s->add_option("--config", o.config, "key=value file; flags win");
  s->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  s->add_option("--threads", o.threads, "Worker cap (0 = hardware)")->check(CLI::NonNegativeNumber);
  s->add_flag("--verbose", o.verbose, "Progress on stderr");
}

void add_problem(CLI::App* s, Options& o) {
  s->add_option("--radius", o.radius, "Disk radius R > 1")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--tol", o.tol, "PDAS tolerance relative to |l|")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--max-iter", o.max_iter, "PDAS iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
}

int cmd_solve(const Options& o) {
  const int levels = o.levels < 0 ? 1 : o.levels;
  int q = o.p + kReferenceOffset;
  if (!o.q.empty()) q = o.q.front();
  else if (!o.q_offsets.empty()) q = o.p + o.q_offsets.front();
  if (q < 1) throw PreconditionError("q must be at least 1");

  const ExactRadialSolution exact(o.radius);
  auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(o.radius, levels));
  FESpace space(mesh, o.p);
  const double psi = exact.psi_const;
  const DiscreteObstacleProblem prob =
      assemble(space, [](const Point2&) { return ExactRadialSolution::a; },
               [](const Point2&) { return ExactRadialSolution::f; }, [psi](const Point2&) { return psi; }, q);
  PdasOptions opt;
  opt.verbose = o.verbose;
  PdasState st;
  try {
    st = pdas_solve(prob, o.tol, o.max_iter, opt);
  } catch (const DefinitenessError& e) {
    std::cerr << "solve: " << e.what() << '\n';
    return 1;
  } catch (const SolverFailure& e) {
    std::cerr << "solve: " << e.what() << '\n';
    return 1;
  }
  const Eigen::VectorXd total = space.expand(st.u);
  const double err = h1_error(space, total, exact).global;

  std::vector<char> active(space.num_free(), 0);
  for (int i : st.active) active[i] = 1;
  std::ostringstream dump;
  dump << "x y u psi lambda active\n";
  char buf[160];
  for (std::size_t i = 0; i < space.num_free(); ++i) {
    const Point2& x = space.node(space.total_index(static_cast<int>(i)));
    std::snprintf(buf, sizeof buf, "%.16e %.16e %.16e %.16e %.16e %d\n", x.x, x.y, st.u[i], prob.obstacle[i],
                  st.lambda[i], active[i]);
    dump << buf;
  }
  write_file((fs::path(o.out_dir) / "solution.txt").string(), dump.str());

  std::printf("elements=%zu p=%d q=%d N=%zu iterations=%d active=%zu h1_error=%.6e\n", mesh->num_elements(), o.p, q,
              space.num_free(), st.iteration, st.active.size(), err);
  return 0;
}

int cmd_study(const Options& o) {
  StudyConfig c;
  c.mode = parse_mode(o.mode);
  c.p = o.p;
  if (!o.q_offsets.empty()) c.q_offsets = o.q_offsets;
  if (o.levels >= 0) c.levels = o.levels;
  c.theta = o.theta;
  c.radius = o.radius;
  c.tol = o.tol;
  c.max_iter = o.max_iter;
  c.max_dofs = o.max_dofs;
  c.verbose = o.verbose;
  const CampaignResult r = run_campaign(c);
  for (std::size_t k = 0; k < c.q_offsets.size(); ++k) {
    const int j = c.q_offsets[k];
    const auto& rec = r.records[k];
    const std::string name = campaign_file_name(c.mode, c.p, j);
    write_campaign_csv((fs::path(o.out_dir) / name).string(), rec);
    write_loglog_csv((fs::path(o.out_dir) / ("loglog_" + name)).string(), rec);
    std::printf("%s: levels=%zu", name.c_str(), rec.size());
    if (!rec.empty()) std::printf(" N=%zu", rec.back().N);
    try {
      std::printf(" eoc_total=%.4f", eoc(rec, RecordField::Total));
    } catch (const UndefinedRateError&) {
      std::printf(" eoc_total=undefined");
    }
    try {
      std::printf(" eoc_quad=%.4f", eoc(rec, RecordField::Quad));
    } catch (const UndefinedRateError&) {
      std::printf(" eoc_quad=undefined");
    }
    std::printf("\n");
  }
  return 0;
}

int cmd_spectrum(const Options& o) {
  const int levels = o.levels < 0 ? 1 : o.levels;
  std::vector<int> qs = o.q;
  for (int j : o.q_offsets) qs.push_back(o.p + j);
  if (qs.empty()) qs = {o.p - 1, o.p, o.p + 1, o.p + 2, o.p + kReferenceOffset};
  auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(o.radius, levels));
  FESpace space(mesh, o.p);
  const double psi = ExactRadialSolution(o.radius).psi_const;
  std::ostringstream csv;
  csv << "p,q,N,min_eig,max_eig,near_zero,positive_definite\n";
  for (int q : qs) {
    if (q < 1) {
      std::printf("p=%d q=%d skipped (q < 1)\n", o.p, q);
      continue;
    }
    const auto prob = assemble(space, [](const Point2&) { return 1.0; }, [](const Point2&) { return -2.0; },
                               [psi](const Point2&) { return psi; }, q);
    const SpectrumReport s = spectrum_report(prob);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%d,%d,%zu,%.16e,%.16e,%d,%d\n", o.p, q, space.num_free(), s.min_eig, s.max_eig,
                  s.near_zero, s.positive_definite ? 1 : 0);
    csv << buf;
    std::printf("p=%d q=%d N=%zu min_eig=%.6e max_eig=%.6e near_zero=%d %s\n", o.p, q, space.num_free(), s.min_eig,
                s.max_eig, s.near_zero, s.positive_definite ? "positive-definite" : "NOT positive-definite");
  }
  write_file((fs::path(o.out_dir) / "spectrum.csv").string(), csv.str());
  return 0;
}

int count_failed(const std::vector<BoundReport>& r) {
  int n = 0;
  for (const auto& b : r) n += b.holds ? 0 : 1;
  return n;
}

double min_margin(const std::vector<BoundReport>& r) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : r) m = std::min(m, b.margin);
  return m;
}

int cmd_verify_abstract(const Options& o) {
  const int trials = o.trials < 0 ? 1000 : o.trials;
  const AbstractSuiteResult r = run_abstract_suite(trials, o.seed);
  const std::pair<const char*, const std::vector<BoundReport>*> parts[] = {
      {"strang_falk", &r.strang}, {"corollary", &r.corollary}, {"lipschitz", &r.lipschitz}};
  for (const auto& [name, reps] : parts) {
    std::ostringstream csv;
    write_reports_csv(csv, *reps);
    write_file((fs::path(o.out_dir) / (std::string(name) + ".csv")).string(), csv.str());
    std::printf("%s: checks=%zu violations=%d min_margin=%.6e\n", name, reps->size(), count_failed(*reps),
                min_margin(*reps));
  }
  std::printf("pivoting_fallbacks=%d\n", r.fallbacks);
  return r.all_hold() ? 0 : 1;
}

int cmd_verify_constrained(const Options& o) {
  const int trials = o.trials < 0 ? 100 : o.trials;
  const ConstrainedSuiteResult r = run_constrained_suite(trials, o.seed);
  std::ostringstream csv;
  write_reports_csv(csv, r.reports);
  write_file((fs::path(o.out_dir) / "constrained_bound.csv").string(), csv.str());
  std::printf("max_saddle_gap=%.3e max_equality_residual=%.3e min_ellipticity_margin=%.3e\n", r.max_saddle_gap,
              r.max_equality_residual, r.min_ellipticity_margin);
  std::printf("min_psd_eig=%.3e max_norm_excess=%.3e bound_checks=%zu violations=%d\n", r.min_psd_eig,
              r.max_norm_excess, r.reports.size(), count_failed(r.reports));
  return r.all_hold() ? 0 : 1;
}

int cmd_quadrature(const Options& o) {
  std::vector<int> qs = o.q;
  for (int j : o.q_offsets) qs.push_back(o.p + j);
  if (qs.empty())
    for (int q = 1; q <= o.p + 3; ++q) qs.push_back(q);
  std::ostringstream csv;
  csv << "p,q,admissible,enough_points,c_p,d_p\n";
  for (int q : qs) {
    if (q < 1) throw PreconditionError("q must be at least 1");
    const TensorQuadRule rule = tensor_rule(q);
    const QuadEquivalenceReport r = estimate_equivalence_constants(o.p, rule);
    std::printf("p=%d q=%d admissible=%d enough_points=%d c_p=%.12g d_p=%.12g\n", o.p, q, r.admissible ? 1 : 0,
                r.enough_points ? 1 : 0, r.c_p, r.d_p);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.16e,%.16e\n", o.p, q, r.admissible ? 1 : 0, r.enough_points ? 1 : 0,
                  r.c_p, r.d_p);
    csv << buf;
    if (o.verbose)
      for (int i = 0; i < q; ++i)
        std::printf("  node=%.17g weight=%.17g\n", rule.base.nodes[i], rule.base.weights[i]);
  }
  write_file((fs::path(o.out_dir) / "quadrature.csv").string(), csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Obstacle-problem quadrature and variational-inequality laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto* solve = app.add_subcommand("solve", "One obstacle solve on a uniformly refined disk mesh");
  auto* study = app.add_subcommand("study", "Convergence campaign (writes one CSV per q-offset)");
  auto* spectrum = app.add_subcommand("spectrum", "Extreme stiffness eigenvalues for a (p, q) sweep");
  auto* vabs = app.add_subcommand("verify-abstract", "Randomized Strang-Falk, corollary and Lipschitz checks");
  auto* vcon = app.add_subcommand("verify-constrained", "Randomized condensation and combined-bound checks");
  auto* quad = app.add_subcommand("quadrature", "Quadrature admissibility and norm-equivalence constants");

  for (auto* s : {solve, study, spectrum, vabs, vcon, quad}) add_common(s, o);
  for (auto* s : {solve, study, spectrum}) add_problem(s, o);
  for (auto* s : {solve, study, spectrum, quad}) {
    s->add_option("--p", o.p, "Polynomial degree")->capture_default_str()->check(CLI::Range(1, 30));
    s->add_option("--q-offset", o.q_offsets, "Offset j with q = p + j (repeatable)")->delimiter(',');
  }
  for (auto* s : {solve, spectrum, quad}) s->add_option("--q", o.q, "Gauss points per direction")->delimiter(',');
  for (auto* s : {solve, study, spectrum})
    s->add_option("--levels", o.levels, "Refinement levels")->check(CLI::NonNegativeNumber);
  study->add_option("--mode", o.mode, "h-uniform, h-adaptive or p-uniform")
      ->capture_default_str()
      ->check(CLI::IsMember({"h-uniform", "h-adaptive", "p-uniform"}));
  study->add_option("--theta", o.theta, "Dorfler bulk parameter in (0, 1]")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0) & CLI::PositiveNumber);
  study->add_option("--max-dofs", o.max_dofs, "Stop before levels with more unknowns")->capture_default_str();
  for (auto* s : {vabs, vcon}) {
    s->add_option("--trials", o.trials, "Number of random instances")->check(CLI::PositiveNumber);
    s->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }
  if (o.radius <= 1.0) {
    std::cerr << "--radius must exceed 1 (the contact set is the unit disk)\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  set_num_threads(o.threads);
  try {
    fs::create_directories(o.out_dir);
    write_manifest(o, *sub);
    if (sub == solve) return cmd_solve(o);
    if (sub == study) return cmd_study(o);
    if (sub == spectrum) return cmd_spectrum(o);
    if (sub == vabs) return cmd_verify_abstract(o);
    if (sub == vcon) return cmd_verify_constrained(o);
    if (sub == quad) return cmd_quadrature(o);
  } catch (const PreconditionError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
