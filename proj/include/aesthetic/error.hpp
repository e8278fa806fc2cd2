#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aesthetic {

enum class ErrorCode {
  AllZeroCounts,
  InvalidDistribution,
  InvalidParams,
  UnsupportedExponent,
  EvenKernel,
  NonPositiveSigma,
  ImageTooSmall,
  NotSingleChannel,
  InvalidImage,
  InvalidArchitecture,
  ShapeMismatch,
  EmptyDataset,
  CorruptCheckpoint,
  ParseError,
  RangeError,
  DuplicateId,
  EmptyInput,
  DegenerateVariance,
  EmptyIntersection,
  LabelMismatch,
  UnknownCategory,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aesthetic
