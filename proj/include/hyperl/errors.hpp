#pragma once

#include <stdexcept>
#include <string>

namespace hyperl {

// Shape or length mismatch between an argument and the structure it feeds.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Rejected configuration value or malformed config/flag input.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A NaN or infinity reached a place that requires finite numbers.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The PDE state became non-finite during a step.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(int t_index, double mu)
      : std::runtime_error("state blow-up at t_index=" + std::to_string(t_index) +
                           " mu=" + std::to_string(mu)),
        t_index_(t_index),
        mu_(mu) {}

  int t_index() const { return t_index_; }
  double mu() const { return mu_; }

 private:
  int t_index_;
  double mu_;
};

// Iterative linear solve failed to reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace hyperl
