#include "vilab/linear_solver.hpp"

#ifdef VILAB_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#else
#include <Eigen/SparseCholesky>
#endif

namespace vilab {

struct SparseCholesky::Impl {
#ifdef VILAB_HAVE_CHOLMOD
  Impl() {
    // Failures are reported through info(); keep CHOLMOD quiet about them.
    llt.cholmod().print = 0;
    llt.cholmod().error_handler = nullptr;
  }
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
#else
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
#endif
};

SparseCholesky::SparseCholesky() : impl_(std::make_unique<Impl>()) {}
SparseCholesky::~SparseCholesky() = default;
SparseCholesky::SparseCholesky(SparseCholesky&&) noexcept = default;
SparseCholesky& SparseCholesky::operator=(SparseCholesky&&) noexcept = default;

void SparseCholesky::analyze(const Eigen::SparseMatrix<double>& a) { impl_->llt.analyzePattern(a); }

bool SparseCholesky::factorize(const Eigen::SparseMatrix<double>& a) {
  impl_->llt.factorize(a);
  return impl_->llt.info() == Eigen::Success;
}

Eigen::VectorXd SparseCholesky::solve(const Eigen::VectorXd& b) const { return impl_->llt.solve(b); }

const char* SparseCholesky::backend() {
#ifdef VILAB_HAVE_CHOLMOD
  return "cholmod-supernodal";
#else
  return "eigen-simplicial";
#endif
}

}  // namespace vilab
