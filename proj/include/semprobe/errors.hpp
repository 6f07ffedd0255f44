#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semprobe {

enum class ErrorCode {
  // embedding io
  MalformedHeader,
  DimensionMismatch,
  DuplicateToken,
  EmptyFile,
  InvalidToken,
  UnknownWord,
  ZeroQuery,
  KTooLarge,
  // math
  DegeneratePoints,
  ZeroVector,
  ConstantInput,
  ShapeMismatch,
  StaleTape,
  // models
  ConfigInvalid,
  NonFiniteLoss,
  BadMagic,
  VersionUnsupported,
  CorruptTensor,
  // probing / evaluation
  DimensionOutOfRange,
  ZeroSemanticDirection,
  EmptyRange,
  InsufficientPairs,
  NoUsefulDims,
  // service
  UnknownModel,
  BadRange,
  BadRequest,
  PortInUse,
  Io,
};

/// Stable snake_case identifier used in CLI messages and HTTP error bodies.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised for lookups of tokens missing from the vocabulary. Carries the
/// offending token so callers can report it verbatim.
class UnknownWordError : public Error {
 public:
  explicit UnknownWordError(std::string word)
      : Error(ErrorCode::UnknownWord, "unknown word: " + word),
        word_(std::move(word)) {}

  const std::string& word() const noexcept { return word_; }

 private:
  std::string word_;
};

}  // namespace semprobe
