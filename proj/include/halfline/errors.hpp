#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace halfline {

/// Bad arguments or violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Eigensolver breakdown, singular or ill-conditioned regression, non-finite state.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Picard iteration that failed to contract within its iteration budget.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(const std::string& what, std::vector<double> ratios)
      : std::runtime_error(what), ratios_(std::move(ratios)) {}

  const std::vector<double>& ratios() const { return ratios_; }

 private:
  std::vector<double> ratios_;
};

/// A checked property (growth bound, Lipschitz constant, optimality) was violated.
class PropertyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace halfline
