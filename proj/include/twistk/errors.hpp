#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace twistk {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field/grid shape mismatch or malformed input data.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation (e.g. a
/// non-positive constant metric).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Right-hand side not in the range of a singular operator.
class SolvabilityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

/// A hypothesis required by a solver does not hold (e.g. the trace of the
/// twist form is not constant).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Dense oracle asked to assemble a grid larger than it supports.
class RefusalError : public Error {
 public:
  using Error::Error;
};

/// The metric g0 + ddbar(phi) lost positivity.
class DegenerateMetricError : public Error {
 public:
  DegenerateMetricError(std::size_t point, double eigenvalue, std::string context = {})
      : Error(make_message(point, eigenvalue, context)),
        point_(point),
        eigenvalue_(eigenvalue) {}

  std::size_t point() const noexcept { return point_; }
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  static std::string make_message(std::size_t point, double eigenvalue,
                                  const std::string& context) {
    std::string msg = "degenerate metric at grid point " + std::to_string(point) +
                      " (smallest eigenvalue " + std::to_string(eigenvalue) + ")";
    if (!context.empty()) msg += ": " + context;
    return msg;
  }

  std::size_t point_;
  double eigenvalue_;
};

/// Krylov solver ran out of iterations.
class IterationLimitError : public Error {
 public:
  IterationLimitError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace twistk
