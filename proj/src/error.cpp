#include "l4/error.hpp"

namespace l4 {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyBundle: return "EmptyBundle";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kHeaderMismatch: return "HeaderMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyHistory: return "EmptyHistory";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kTooFewNodes: return "TooFewNodes";
    case ErrorCode::kNoIterativeStage: return "NoIterativeStage";
    case ErrorCode::kNoIterationMarkers: return "NoIterationMarkers";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

}  // namespace l4
