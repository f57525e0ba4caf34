#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include "vilab/abstract_vi.hpp"
#include "vilab/fem.hpp"

namespace vilab {

/// Text matrix: header "n m", then n rows of m values in %.17g.
void write_matrix(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& is);

/// A, ell, psi and the constrained mask (0/1 column) as consecutive matrices.
void write_instance(std::ostream& os, const DenseVIInstance& inst);
DenseVIInstance read_instance(std::istream& is);

/// CSV with header trial,lhs,rhs,margin,holds.
void write_reports_csv(std::ostream& os, const std::vector<BoundReport>& reports);

/// Coordinate triplets "row col value", one per stored entry, row-major order.
void write_coo(std::ostream& os, const SparseMatrix& k);

void write_file(const std::string& path, const std::string& contents);

}  // namespace vilab
