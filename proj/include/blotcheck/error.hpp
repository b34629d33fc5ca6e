#ifndef BLOTCHECK_ERROR_HPP
#define BLOTCHECK_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace blotcheck {

enum class ErrorCode {
  MalformedManifest,
  DuplicateKey,
  FetchFailed,
  DecodeFailed,
  EmptyImage,
  IoError,
  NotColorImage,
  DegenerateInterior,
  ConstantImage,
  OutOfBounds,
  UnknownPanelIndex,
  TooFewFigures,
  ShapeMismatch,
  InputTooSmall,
  LengthMismatch,
  EmptyBatch,
  NonFiniteGradient,
  ChecksumMismatch,
  VersionMismatch,
  FormatError,
  SingleClassTrainingSet,
  EmptySplit,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace blotcheck

#endif  // BLOTCHECK_ERROR_HPP
