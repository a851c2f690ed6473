#pragma once

#include "keypose/codec.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace keypose {

/// Autoregressive scorer: for a prefix of already chosen tokens, returns the
/// next-token log-probabilities over the full vocabulary (log-sum-exp = 0).
/// Must be deterministic for a fixed prefix.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual int vocab_size() const = 0;
  virtual std::vector<double> score(std::span<const TokenId> prefix) const = 0;
};

struct MixtureComponent {
  double center = 0.0;  // bin index relative to the step's band
  double width = 1.0;   // standard deviation in bins
  double weight = 1.0;  // probability mass of this component
};

using StepMixture = std::vector<MixtureComponent>;

/// Prefix-independent scorer whose per-step distribution is a mixture of
/// discretized Gaussians over the step's valid band. Each component is
/// normalized over the band so that `weight` is its exact mass. `noise` adds
/// seeded uniform jitter in [-noise, noise] to the log-density; `off_band_mass`
/// spreads that much probability uniformly over tokens outside the band.
class SyntheticScorer : public Scorer {
 public:
  SyntheticScorer(Grammar grammar, std::vector<StepMixture> steps, std::uint64_t seed = 0,
                  double noise = 0.0, double off_band_mass = 0.0,
                  int vocab_size = kVocabSize);

  int vocab_size() const override { return vocab_size_; }
  std::vector<double> score(std::span<const TokenId> prefix) const override;

  const Grammar& grammar() const noexcept { return grammar_; }

 private:
  Grammar grammar_;
  int vocab_size_;
  std::vector<std::vector<double>> log_probs_;
};

struct Beam {
  TokenSequence tokens;
  double log_prob = 0.0;
};

/// Indices i with p[i] >= p[j] for every j in [i - w, i + w] clipped to the
/// vector. Any monotone transform of probabilities (e.g. log-probs) gives the
/// same result. Throws InvalidArgument for w < 1 or NaN entries.
std::vector<std::size_t> nms_1d(std::span<const double> p, int window);

Beam decode_greedy(const Scorer& scorer, const Grammar& grammar);

/// k independent samples. Temperature scales the grammar-masked log-probs
/// before renormalization; beam log_prob stays the scorer's log-probability.
std::vector<Beam> decode_sampling(const Scorer& scorer, const Grammar& grammar,
                                  double temperature, std::uint64_t seed, int k);

/// Standard beam search, no length normalization. Result sorted by log_prob
/// descending; ties resolve to the earlier parent beam, then the lower token id.
std::vector<Beam> decode_beam(const Scorer& scorer, const Grammar& grammar, int beams);

inline constexpr int kDefaultLocWindow = 100;
inline constexpr int kDefaultSegWindow = 12;

/// Beam search where, at each step, every non-local-maximum of the band's
/// distribution is suppressed to -inf before the top-n expansion.
std::vector<Beam> decode_beam_nms(const Scorer& scorer, const Grammar& grammar, int beams,
                                  int window_loc = kDefaultLocWindow,
                                  int window_seg = kDefaultSegWindow);

}  // namespace keypose
