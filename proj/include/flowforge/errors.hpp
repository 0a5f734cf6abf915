#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace flowforge {

// Bad arguments: dimension mismatches, out-of-range indices, empty inputs.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A documented precondition on the mathematical inputs does not hold
// (for example a covariance outside the assumed sandwich).
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Singular or non-positive-definite matrix where an inverse is needed.
class MatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical state left the finite range or exceeded the divergence cutoff.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// Least-squares fit with a rank-deficient design matrix.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

// A log-log slope fit had no usable (finite, non-underflowed) points.
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A coefficient system for one (coordinate, multi-index) pair could not be
// solved to tolerance.
class SolvabilityError : public std::runtime_error {
 public:
  SolvabilityError(const std::string& what, int coordinate, std::vector<int> index,
                   std::vector<double> singular_values)
      : std::runtime_error(what),
        coordinate_(coordinate),
        index_(std::move(index)),
        singular_values_(std::move(singular_values)) {}
  int coordinate() const { return coordinate_; }
  const std::vector<int>& index() const { return index_; }
  const std::vector<double>& singular_values() const { return singular_values_; }

 private:
  int coordinate_;
  std::vector<int> index_;
  std::vector<double> singular_values_;
};

// An affine coupling block has a (numerically) zero scale entry, so it cannot
// be inverted at the requested point.
class SingularBlockError : public std::runtime_error {
 public:
  SingularBlockError(const std::string& what, long block, int coordinate)
      : std::runtime_error(what), block_(block), coordinate_(coordinate) {}
  long block() const { return block_; }
  int coordinate() const { return coordinate_; }

 private:
  long block_;
  int coordinate_;
};

// Invalid experiment configuration (unknown field, missing field, bad value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowforge
