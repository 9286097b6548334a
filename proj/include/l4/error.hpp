#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace l4 {

enum class ErrorCode {
  kEmptyBundle,
  kIoError,
  kHeaderMismatch,
  kLengthMismatch,
  kEmptyHistory,
  kDomainError,
  kTooFewNodes,
  kNoIterativeStage,
  kNoIterationMarkers,
  kEmptySequence,
  kDuplicateId,
  kValidationError,
  kInvalidSpec,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so that callers (and
// tests) can tell the documented error kinds apart without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace l4
