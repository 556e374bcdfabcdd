#include "core/error.hpp"

namespace specvoc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kEmptyShortlist: return "EmptyShortlist";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidBudget: return "InvalidBudget";
    case ErrorCode::kInvalidToken: return "InvalidToken";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDegenerateColumn: return "DegenerateColumn";
    case ErrorCode::kInvalidClusterCount: return "InvalidClusterCount";
    case ErrorCode::kInvalidClusterId: return "InvalidClusterId";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kZeroMassSubset: return "ZeroMassSubset";
    case ErrorCode::kInfeasibleEnumeration: return "InfeasibleEnumeration";
    case ErrorCode::kInvalidProposal: return "InvalidProposal";
    case ErrorCode::kEmptyTrace: return "EmptyTrace";
    case ErrorCode::kHashMismatch: return "HashMismatch";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace specvoc
