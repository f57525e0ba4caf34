#include "vilab/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "vilab/errors.hpp"

namespace vilab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << fmt(m(i, j));
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& is) {
  Eigen::Index n = 0, m = 0;
  if (!(is >> n >> m) || n < 0 || m < 0) throw PreconditionError("read_matrix: bad header");
  Eigen::MatrixXd a(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (!(is >> a(i, j))) throw PreconditionError("read_matrix: truncated data");
  return a;
}

void write_instance(std::ostream& os, const DenseVIInstance& inst) {
  write_matrix(os, inst.A);
  write_matrix(os, inst.ell);
  write_matrix(os, inst.psi);
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(inst.dim());
  for (int i : inst.constrained) mask[i] = 1.0;
  write_matrix(os, mask);
}

DenseVIInstance read_instance(std::istream& is) {
  DenseVIInstance inst;
  inst.A = read_matrix(is);
  inst.ell = read_matrix(is);
  inst.psi = read_matrix(is);
  const Eigen::MatrixXd mask = read_matrix(is);
  const Eigen::Index n = inst.A.rows();
  if (inst.A.cols() != n || inst.ell.size() != n || inst.psi.size() != n || mask.size() != n)
    throw PreconditionError("read_instance: inconsistent dimensions");
  for (Eigen::Index i = 0; i < n; ++i)
    if (mask(i) != 0.0) inst.constrained.push_back(static_cast<int>(i));
  return inst;
}

void write_reports_csv(std::ostream& os, const std::vector<BoundReport>& reports) {
  os << "trial,lhs,rhs,margin,holds\n";
  for (std::size_t t = 0; t < reports.size(); ++t) {
    const auto& r = reports[t];
    os << t << ',' << fmt(r.lhs) << ',' << fmt(r.rhs) << ',' << fmt(r.margin) << ',' << (r.holds ? 1 : 0) << '\n';
  }
}

void write_coo(std::ostream& os, const SparseMatrix& k) {
  for (Eigen::Index r = 0; r < k.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(k, r); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << fmt(it.value()) << '\n';
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << contents;
}

}  // namespace vilab
