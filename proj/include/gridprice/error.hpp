#ifndef GRIDPRICE_ERROR_HPP
#define GRIDPRICE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridprice {

enum class ErrorCode {
  NonConvex,
  DimensionMismatch,
  InvalidArgument,
  NegativeDemand,
  InfeasibleConsumption,
  InfeasibleEnv,
  DegenerateWeights,
  TooManyUsers,
  UnknownFormulation,
  NonzeroNightSolar,
  SolverFailure,
  IoError,
  SchemaViolation,
  ValidationFailed,
};

/// Stable identifier printed by the CLI and written to logs.
inline constexpr std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::NonConvex: return "NON_CONVEX";
  case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
  case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
  case ErrorCode::NegativeDemand: return "NEGATIVE_DEMAND";
  case ErrorCode::InfeasibleConsumption: return "INFEASIBLE_CONSUMPTION";
  case ErrorCode::InfeasibleEnv: return "INFEASIBLE_ENV";
  case ErrorCode::DegenerateWeights: return "DEGENERATE_WEIGHTS";
  case ErrorCode::TooManyUsers: return "TOO_MANY_USERS";
  case ErrorCode::UnknownFormulation: return "UNKNOWN_FORMULATION";
  case ErrorCode::NonzeroNightSolar: return "NONZERO_NIGHT_SOLAR";
  case ErrorCode::SolverFailure: return "SOLVER_FAILURE";
  case ErrorCode::IoError: return "IO_ERROR";
  case ErrorCode::SchemaViolation: return "SCHEMA_VIOLATION";
  case ErrorCode::ValidationFailed: return "VALIDATION_FAILED";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace gridprice

#endif
