#pragma once

#include "keypose/codec.hpp"
#include "keypose/decoder.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace keypose {

// LGTD binary layout (little-endian):
//   "LGTD" | u32 version = 1 | u32 vocab_size | u32 num_steps |
//   num_steps * vocab_size f32 raw logits, row per step.
inline constexpr std::uint32_t kLogitDumpVersion = 1;
inline constexpr std::size_t kLogitDumpHeaderSize = 16;

struct LogitDump {
  std::uint32_t vocab_size = 0;
  std::uint32_t num_steps = 0;
  std::vector<float> logits;  // num_steps x vocab_size, row-major

  std::span<const float> step(std::size_t index) const;
};

/// Throws FormatError (position = byte offset) for bad magic, version,
/// truncation, trailing bytes or NaN/+inf logits; VocabMismatch for a zero
/// vocabulary in the header.
LogitDump parse_logit_dump(std::span<const std::byte> bytes);
LogitDump read_logit_dump(const std::filesystem::path& path);

std::vector<std::byte> serialize_logit_dump(const LogitDump& dump);
void write_logit_dump(const std::filesystem::path& path, const LogitDump& dump);

/// Teacher-forced replay: score(prefix) returns the log-softmax of step
/// prefix.size() regardless of the prefix content.
class ReplayScorer : public Scorer {
 public:
  /// Throws VocabMismatch when the dump's vocabulary differs from `expected_vocab`.
  explicit ReplayScorer(const LogitDump& dump, int expected_vocab = kVocabSize);

  int vocab_size() const override { return vocab_size_; }
  std::vector<double> score(std::span<const TokenId> prefix) const override;
  std::size_t num_steps() const noexcept { return log_probs_.size(); }

  /// Throws StepOutOfRange naming the first missing step if the dump is
  /// shorter than the grammar.
  void require_steps(const Grammar& grammar) const;

 private:
  int vocab_size_;
  std::vector<std::vector<double>> log_probs_;
};

}  // namespace keypose
