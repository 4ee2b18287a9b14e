#pragma once

#include <stdexcept>
#include <string>

namespace wmflow {

enum class ErrorKind {
  InvalidArgument,
  IncompatibleRhs,
  SingularWeight,
  InfeasibleConstraint,
  DeltaTooLarge,
  QuadratureFailure,
  MassMismatch,
  InnerSolverFailure,
  OutOfRange,
  DegenerateState,
  CflViolation,
  PositivityLoss,
  LinearSolveFailure,
  ConfigError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IncompatibleRhs: return "IncompatibleRhs";
    case ErrorKind::SingularWeight: return "SingularWeight";
    case ErrorKind::InfeasibleConstraint: return "InfeasibleConstraint";
    case ErrorKind::DeltaTooLarge: return "DeltaTooLarge";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::MassMismatch: return "MassMismatch";
    case ErrorKind::InnerSolverFailure: return "InnerSolverFailure";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::DegenerateState: return "DegenerateState";
    case ErrorKind::CflViolation: return "CflViolation";
    case ErrorKind::PositivityLoss: return "PositivityLoss";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the direct PDE oracle when an iterate leaves [0, M].
class PositivityLossError : public Error {
 public:
  PositivityLossError(double time, std::size_t step, double min_value)
      : Error(ErrorKind::PositivityLoss,
              "iterate left the admissible range at t=" + std::to_string(time) +
                  " (step " + std::to_string(step) + ", min value " + std::to_string(min_value) + ")"),
        time_(time), step_(step), min_value_(min_value) {}

  double time() const noexcept { return time_; }
  std::size_t step() const noexcept { return step_; }
  double min_value() const noexcept { return min_value_; }

 private:
  double time_;
  std::size_t step_;
  double min_value_;
};

}  // namespace wmflow
