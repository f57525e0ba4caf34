#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "vilab/fem.hpp"

namespace vilab {

/// Obstacle problem on the disk of radius R with a = 1, f = -2 and constant
/// obstacle psi = -(R^2 - log R^2 - 1)/2 (log(1.5) - 5/8 for R = 1.5):
///   u = psi                              for |x| <= 1,
///   u = (|x|^2 - log|x|^2 - 1)/2 + psi   for |x| >= 1.
struct ExactRadialSolution {
  explicit ExactRadialSolution(double radius = 1.5);

  double radius;
  double psi_const;
  static constexpr double f = -2.0;
  static constexpr double a = 1.0;

  double value(const Point2& x) const;
  Point2 gradient(const Point2& x) const;
};

struct H1Error {
  double global = 0.0;
  /// Squared element contributions.
  std::vector<double> per_element;
};

using GradientField = std::function<Point2(const Point2&)>;

/// |u - u_hp|_{H^1} with (p+12)^2 Gauss points per element. `coeffs` are
/// total-DOF coefficients.
H1Error h1_error(const FESpace& space, const Eigen::VectorXd& coeffs, const GradientField& exact_gradient);
H1Error h1_error(const FESpace& space, const Eigen::VectorXd& coeffs, const ExactRadialSolution& exact);
/// |u_ref - u_hp|_{H^1} for two functions on the same space.
H1Error h1_error(const FESpace& space, const Eigen::VectorXd& coeffs, const FESpace& ref_space,
                 const Eigen::VectorXd& ref_coeffs);

/// Minimal set (greedy by descending indicator, ties to the lower id) with
/// sum_M eta^2 >= theta sum eta^2. Indicators are squared errors. Sorted.
std::vector<int> dorfler_mark(const std::vector<double>& eta_sq, double theta);

struct ConvergenceRecord {
  int level = 0;
  std::size_t N = 0;
  double h = 0.0;
  double err_total = std::numeric_limits<double>::quiet_NaN();
  double err_quad = std::numeric_limits<double>::quiet_NaN();
  double eoc_total = std::numeric_limits<double>::quiet_NaN();
  double eoc_quad = std::numeric_limits<double>::quiet_NaN();
  /// Solve failed (e.g. indefinite matrix for q <= p - 1).
  bool failed = false;
  /// err_quad below 1e-12 |u_{hp,p+11}|_{H^1}: excluded from rate fits.
  bool quad_floor = false;
  int degree = 0;
  int quad_q = 0;
  int pdas_iterations = 0;
  std::vector<double> per_element;
};

enum class RecordField { Total, Quad };

/// Negated least-squares slope of log(err) against log(N) over the last
/// `window` usable records (failed levels, non-positive errors and levels on
/// the rounding floor are skipped). Throws UndefinedRateError if fewer than
/// two remain.
double eoc(const std::vector<ConvergenceRecord>& records, RecordField field, int window = 3);
double eoc_fit(const std::vector<double>& n, const std::vector<double>& err, int window = 3);

enum class StudyMode { HUniform, HAdaptive, PUniform };

const char* to_string(StudyMode mode);
StudyMode parse_mode(const std::string& s);

struct StudyConfig {
  StudyMode mode = StudyMode::HUniform;
  /// Degree for h-versions; highest degree for the p-version.
  int p = 1;
  /// Offsets j with q = p + j.
  std::vector<int> q_offsets{11};
  int levels = 5;
  double theta = 0.5;
  double radius = 1.5;
  double tol = 1e-10;
  int max_iter = 100;
  /// Levels whose free-DOF count would exceed this are not computed.
  std::size_t max_dofs = 350000;
  /// Uniform refinements of the initial mesh for the p-version (1 -> 80 elements).
  int p_mesh_level = 1;
  bool verbose = false;
};

inline constexpr int kReferenceOffset = 11;

struct CampaignResult {
  StudyConfig config;
  /// Same order as config.q_offsets.
  std::vector<std::vector<ConvergenceRecord>> records;
  const std::vector<ConvergenceRecord>& for_offset(int j) const;
};

/// Per level: assemble and solve at q = p + 11 (reference) and q = p + j for
/// every offset, record errors against the exact solution and the reference,
/// then refine (uniform, Dorfler-adaptive on the reference's exact error, or
/// raise p on the fixed 80-element mesh).
CampaignResult run_campaign(const StudyConfig& config);

/// Initial active set for a solve on `space` from a solution on `old_space`:
/// free DOFs where the transferred solution touches the obstacle. Uses the
/// element parent links unless the meshes are the same.
std::vector<int> transfer_active_guess(const FESpace& old_space, const Eigen::VectorXd& old_total,
                                       const FESpace& space, const Eigen::VectorXd& obstacle, bool same_mesh);

/// CSV with header level,N,h,err_total,err_quad,eoc_total,eoc_quad.
void write_campaign_csv(const std::string& path, const std::vector<ConvergenceRecord>& records);
/// log10(N), log10(err_total), log10(err_quad) per usable level.
void write_loglog_csv(const std::string& path, const std::vector<ConvergenceRecord>& records);
/// <mode><p>_j<j>.csv with mode h (uniform), a (adaptive) or p.
std::string campaign_file_name(StudyMode mode, int p, int j);

}  // namespace vilab
