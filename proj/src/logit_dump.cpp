#include "keypose/logit_dump.hpp"

#include "keypose/error.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace keypose {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'T', 'D'};

std::uint32_t load_u32(std::span<const std::byte> b, std::size_t offset) {
  return static_cast<std::uint32_t>(b[offset]) | (static_cast<std::uint32_t>(b[offset + 1]) << 8) |
         (static_cast<std::uint32_t>(b[offset + 2]) << 16) |
         (static_cast<std::uint32_t>(b[offset + 3]) << 24);
}

void store_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

}  // namespace

std::span<const float> LogitDump::step(std::size_t index) const {
  if (index >= num_steps) {
    throw Error(ErrorKind::StepOutOfRange, "dump has no step " + std::to_string(index), index);
  }
  return std::span<const float>(logits).subspan(index * vocab_size, vocab_size);
}

LogitDump parse_logit_dump(std::span<const std::byte> bytes) {
  if (bytes.size() < kLogitDumpHeaderSize) {
    throw Error(ErrorKind::FormatError,
                "truncated header: " + std::to_string(bytes.size()) + " of 16 bytes",
                bytes.size());
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != static_cast<std::byte>(kMagic[i])) {
      throw Error(ErrorKind::FormatError, "bad magic, expected \"LGTD\"", i);
    }
  }
  const std::uint32_t version = load_u32(bytes, 4);
  if (version != kLogitDumpVersion) {
    throw Error(ErrorKind::FormatError, "unsupported version " + std::to_string(version), 4);
  }
  LogitDump dump;
  dump.vocab_size = load_u32(bytes, 8);
  dump.num_steps = load_u32(bytes, 12);
  if (dump.vocab_size == 0) {
    throw Error(ErrorKind::VocabMismatch, "header declares an empty vocabulary", 8);
  }
  const std::size_t row_bytes = std::size_t{dump.vocab_size} * 4;
  const std::size_t payload = bytes.size() - kLogitDumpHeaderSize;
  const std::size_t complete_rows = payload / row_bytes;
  if (complete_rows < dump.num_steps) {
    const std::size_t offset = kLogitDumpHeaderSize + complete_rows * row_bytes;
    throw Error(ErrorKind::FormatError,
                "truncated payload: step " + std::to_string(complete_rows) + " of " +
                    std::to_string(dump.num_steps) + " is missing (expected " +
                    std::to_string(row_bytes) + " bytes at offset " + std::to_string(offset) +
                    ")",
                offset);
  }
  const std::size_t expected = kLogitDumpHeaderSize + std::size_t{dump.num_steps} * row_bytes;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::FormatError,
                std::to_string(bytes.size() - expected) + " trailing bytes after the last step",
                expected);
  }
  dump.logits.resize(std::size_t{dump.num_steps} * dump.vocab_size);
  for (std::size_t i = 0; i < dump.logits.size(); ++i) {
    const std::size_t offset = kLogitDumpHeaderSize + 4 * i;
    const float v = std::bit_cast<float>(load_u32(bytes, offset));
    if (std::isnan(v) || v == std::numeric_limits<float>::infinity()) {
      throw Error(ErrorKind::FormatError,
                  "invalid logit at step " + std::to_string(i / dump.vocab_size) + ", token " +
                      std::to_string(i % dump.vocab_size),
                  offset);
    }
    dump.logits[i] = v;
  }
  return dump;
}

LogitDump read_logit_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  const std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
  return parse_logit_dump(std::as_bytes(std::span<const char>(raw)));
}

std::vector<std::byte> serialize_logit_dump(const LogitDump& dump) {
  if (dump.logits.size() != std::size_t{dump.num_steps} * dump.vocab_size) {
    throw Error(ErrorKind::InvalidArgument, "logit matrix does not match declared shape");
  }
  std::vector<std::byte> out;
  out.reserve(kLogitDumpHeaderSize + 4 * dump.logits.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  store_u32(out, kLogitDumpVersion);
  store_u32(out, dump.vocab_size);
  store_u32(out, dump.num_steps);
  for (float v : dump.logits) store_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

void write_logit_dump(const std::filesystem::path& path, const LogitDump& dump) {
  const std::vector<std::byte> bytes = serialize_logit_dump(dump);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

ReplayScorer::ReplayScorer(const LogitDump& dump, int expected_vocab)
    : vocab_size_(static_cast<int>(dump.vocab_size)) {
  if (vocab_size_ != expected_vocab) {
    throw Error(ErrorKind::VocabMismatch, "dump vocabulary " + std::to_string(dump.vocab_size) +
                                              " != expected " + std::to_string(expected_vocab));
  }
  log_probs_.reserve(dump.num_steps);
  for (std::size_t s = 0; s < dump.num_steps; ++s) {
    const std::span<const float> row = dump.step(s);
    double m = -std::numeric_limits<double>::infinity();
    for (float x : row) m = std::max(m, static_cast<double>(x));
    if (!std::isfinite(m)) {
      throw Error(ErrorKind::DegenerateDistribution,
                  "step " + std::to_string(s) + " has no finite logit", s);
    }
    double sum = 0.0;
    for (float x : row) sum += std::exp(static_cast<double>(x) - m);
    const double log_z = m + std::log(sum);
    std::vector<double> lp(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) lp[i] = static_cast<double>(row[i]) - log_z;
    log_probs_.push_back(std::move(lp));
  }
}

std::vector<double> ReplayScorer::score(std::span<const TokenId> prefix) const {
  if (prefix.size() >= log_probs_.size()) {
    throw Error(ErrorKind::StepOutOfRange,
                "dump has " + std::to_string(log_probs_.size()) + " steps, step " +
                    std::to_string(prefix.size()) + " requested",
                prefix.size());
  }
  return log_probs_[prefix.size()];
}

void ReplayScorer::require_steps(const Grammar& grammar) const {
  if (log_probs_.size() < grammar.size()) {
    throw Error(ErrorKind::StepOutOfRange,
                "dump is missing step " + std::to_string(log_probs_.size()) + " (has " +
                    std::to_string(log_probs_.size()) + ", grammar needs " +
                    std::to_string(grammar.size()) + ")",
                log_probs_.size());
  }
}

}  // namespace keypose
