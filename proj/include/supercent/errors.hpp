#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace supercent {

// Base of every error raised by the library. kind() is a stable, machine-readable
// tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input", what) {}
};

class SingularDesignError : public Error {
 public:
  explicit SingularDesignError(const std::string& what) : Error("singular-design", what) {}
};

class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what) : Error("degenerate", what) {}
};

class SelectionError : public Error {
 public:
  explicit SelectionError(const std::string& what) : Error("selection", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

/// Raised when an iterative routine exhausts its budget. Carries the last iterate
/// so callers can inspect or restart from it.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double value, Eigen::VectorXd left,
                      Eigen::VectorXd right, int iterations)
      : Error("non-convergence", what),
        value_(value),
        left_(std::move(left)),
        right_(std::move(right)),
        iterations_(iterations) {}

  double value() const noexcept { return value_; }
  const Eigen::VectorXd& left() const noexcept { return left_; }
  const Eigen::VectorXd& right() const noexcept { return right_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double value_;
  Eigen::VectorXd left_;
  Eigen::VectorXd right_;
  int iterations_;
};

}  // namespace supercent
