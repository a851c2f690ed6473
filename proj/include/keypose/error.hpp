#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace keypose {

enum class ErrorKind {
  BehindCamera,
  NonPositiveDepth,
  InvalidArgument,
  OutOfRange,
  GrammarViolation,
  ScorerFailure,
  DegenerateDistribution,
  StepOutOfRange,
  VocabMismatch,
  FormatError,
  LengthMismatch,
  DegenerateEpisode,
  DegenerateInput,
  PlacementFailure,
  EmptyPool,
  DegenerateCrop,
  UnparseableInstruction,
  InsufficientPairs,
  MissingField,
  InvalidPair,
  UnmatchedEpisode,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library. `position()` carries the token index
// for grammar violations and the byte offset for binary format errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> position = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> position_;
};

}  // namespace keypose
