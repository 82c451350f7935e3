#pragma once

#include <stdexcept>
#include <string>

namespace netdiff {

/// Malformed or out-of-range input (dimension mismatch, bad file, bad flag).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observed data that is impossible under the model.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::size_t individual, std::size_t period)
      : std::runtime_error(what), individual_(individual), period_(period) {}

  std::size_t individual() const noexcept { return individual_; }
  std::size_t period() const noexcept { return period_; }

 private:
  std::size_t individual_;
  std::size_t period_;
};

/// Exact evaluation refused because the scenario count exceeds the configured budget.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, double estimate)
      : std::runtime_error(what), estimate_(estimate) {}

  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

/// Every grid point evaluated to -inf.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace netdiff
