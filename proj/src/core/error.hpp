#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specvoc {

enum class ErrorCode {
  kIndexOutOfRange,
  kEmptyShortlist,
  kEmptyInput,
  kInvalidBudget,
  kInvalidToken,
  kNonFiniteLoss,
  kDegenerateColumn,
  kInvalidClusterCount,
  kInvalidClusterId,
  kShapeError,
  kZeroMassSubset,
  kInfeasibleEnumeration,
  kInvalidProposal,
  kEmptyTrace,
  kHashMismatch,
  kIoError,
  kConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const char* message) {
  if (!condition) fail(code, message);
}

}  // namespace specvoc
