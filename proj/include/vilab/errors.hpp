#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vilab {

/// Raised when an operation is called outside its stated domain.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver ran out of iterations. Carries the last iterate.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, std::vector<double> last_iterate)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

/// A factorization met a non-positive pivot (matrix not SPD on the free set).
class DefinitenessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degenerate element geometry (non-positive Jacobian determinant).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few usable records to fit a convergence rate.
class UndefinedRateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vilab
