#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reltime {

enum class ErrorCode {
  NotSquare,
  NonFinite,
  NotHermitian,
  TraceNotOne,
  NotPositive,
  DimensionMismatch,
  DimensionOverflow,
  EigensolverFailure,
  NonPositiveLambda,
  InvalidArgument,
  EmptyTable,
  NegativeWeight,
  QuadratureDrift,
  InvalidDimension,
  NotPointerTime,
  ZeroProbability,
  KernelOffGrid,
  InconsistentConditioning,
  ParseError,
  ValidationError,
  IoError,
};

constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSquare: return "NOT_SQUARE";
    case ErrorCode::NonFinite: return "NON_FINITE";
    case ErrorCode::NotHermitian: return "NOT_HERMITIAN";
    case ErrorCode::TraceNotOne: return "TRACE_NOT_ONE";
    case ErrorCode::NotPositive: return "NOT_POSITIVE";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::DimensionOverflow: return "DIMENSION_OVERFLOW";
    case ErrorCode::EigensolverFailure: return "EIGENSOLVER_FAILURE";
    case ErrorCode::NonPositiveLambda: return "NON_POSITIVE_LAMBDA";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::EmptyTable: return "EMPTY_TABLE";
    case ErrorCode::NegativeWeight: return "NEGATIVE_WEIGHT";
    case ErrorCode::QuadratureDrift: return "QUADRATURE_DRIFT";
    case ErrorCode::InvalidDimension: return "INVALID_DIMENSION";
    case ErrorCode::NotPointerTime: return "NOT_POINTER_TIME";
    case ErrorCode::ZeroProbability: return "ZERO_PROBABILITY";
    case ErrorCode::KernelOffGrid: return "KERNEL_OFF_GRID";
    case ErrorCode::InconsistentConditioning: return "INCONSISTENT_CONDITIONING";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::ValidationError: return "VALIDATION_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

// Numerical failures are the ones a well-formed input can still trigger.
constexpr bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::EigensolverFailure:
    case ErrorCode::QuadratureDrift:
    case ErrorCode::ZeroProbability:
    case ErrorCode::InconsistentConditioning:
      return true;
    default:
      return false;
  }
}

/// Library-wide exception. `magnitude` carries the measured violation when
/// the failure is a tolerance check (0 otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, double magnitude = 0.0)
      : std::runtime_error(what), code_(code), magnitude_(magnitude) {}

  ErrorCode code() const noexcept { return code_; }
  double magnitude() const noexcept { return magnitude_; }

 private:
  ErrorCode code_;
  double magnitude_;
};

}  // namespace reltime
