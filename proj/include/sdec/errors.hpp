#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdec {

enum class ErrorCode {
  kInvalidArgument,
  kNonFinite,
  kConvergenceFailure,
  kZeroMatrix,
  kNotOrthonormal,
  kDimensionMismatch,
  kInfeasibleSpec,
  kNonDisjoint,
  kSliceOverlap,
  kQueryNotInId,
  kNotNested,
  kNotProjector,
  kDiverged,
  kLengthMismatch,
  kNegativeExcursion,
  kMissingProfile,
  kBadMagic,
  kUnsupportedVersion,
  kUnsupportedDtype,
  kFortranOrderUnsupported,
  kShapeNotTwoDim,
  kFileNotFound,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// Errors caused by bad inputs, as opposed to failures inside the library.
// The CLI maps the former to exit code 2 and the latter to exit code 1.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sdec
