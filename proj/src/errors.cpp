#include "sdec/errors.hpp"

namespace sdec {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kZeroMatrix: return "ZeroMatrix";
    case ErrorCode::kNotOrthonormal: return "NotOrthonormal";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::kNonDisjoint: return "NonDisjoint";
    case ErrorCode::kSliceOverlap: return "SliceOverlap";
    case ErrorCode::kQueryNotInId: return "QueryNotInId";
    case ErrorCode::kNotNested: return "NotNested";
    case ErrorCode::kNotProjector: return "NotProjector";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNegativeExcursion: return "NegativeExcursion";
    case ErrorCode::kMissingProfile: return "MissingProfile";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kFortranOrderUnsupported: return "FortranOrderUnsupported";
    case ErrorCode::kShapeNotTwoDim: return "ShapeNotTwoDim";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConvergenceFailure:
    case ErrorCode::kDiverged:
    case ErrorCode::kIoError:
      return false;
    default:
      return true;
  }
}

}  // namespace sdec
