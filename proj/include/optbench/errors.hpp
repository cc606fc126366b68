#pragma once

#include <stdexcept>
#include <string>

namespace optbench {

// Shape/extent mismatches (matmul, QR preconditions, ...).
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid configuration: bad schedules, non-SPD quadratic specs, partition
// gaps, unknown config keys, out-of-schema hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside its documented domain (e.g. lr_at step out of range).
class RangeError : public std::out_of_range {
 public:
  explicit RangeError(const std::string& what) : std::out_of_range(what) {}
};

// Numerical failures that are errors rather than divergence: non-finite
// gradients fed to a step function, non-finite HVP oracle output.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// fit_nlls failed to converge from every start, or an infeasible
// solve_equivalent_data target.
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace optbench
