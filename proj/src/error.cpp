#include "keypose/error.hpp"

namespace keypose {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::GrammarViolation: return "GrammarViolation";
    case ErrorKind::ScorerFailure: return "ScorerFailure";
    case ErrorKind::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorKind::StepOutOfRange: return "StepOutOfRange";
    case ErrorKind::VocabMismatch: return "VocabMismatch";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateEpisode: return "DegenerateEpisode";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::PlacementFailure: return "PlacementFailure";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::DegenerateCrop: return "DegenerateCrop";
    case ErrorKind::UnparseableInstruction: return "UnparseableInstruction";
    case ErrorKind::InsufficientPairs: return "InsufficientPairs";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::InvalidPair: return "InvalidPair";
    case ErrorKind::UnmatchedEpisode: return "UnmatchedEpisode";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> position)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      position_(position) {}

}  // namespace keypose
