#include "keypose/decoder.hpp"

#include "keypose/error.hpp"
#include "keypose/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <string>

namespace keypose {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void check_band(const TokenBand& band, int vocab) {
  if (band.count <= 0 || band.first < 0 || band.first + band.count > vocab) {
    throw Error(ErrorKind::InvalidArgument, "grammar band outside the scorer vocabulary");
  }
}

std::vector<double> call_scorer(const Scorer& scorer, std::span<const TokenId> prefix) {
  std::vector<double> scores;
  try {
    scores = scorer.score(prefix);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ScorerFailure, e.what(), prefix.size());
  }
  if (scores.size() != static_cast<std::size_t>(scorer.vocab_size())) {
    throw Error(ErrorKind::ScorerFailure,
                "scorer returned " + std::to_string(scores.size()) + " scores for vocabulary " +
                    std::to_string(scorer.vocab_size()),
                prefix.size());
  }
  return scores;
}

// Grammar-masked log-probs of the band, indexed relative to band.first.
std::vector<double> band_scores(const std::vector<double>& scores, const TokenBand& band) {
  std::vector<double> out(scores.begin() + band.first, scores.begin() + band.first + band.count);
  for (double& x : out) {
    if (std::isnan(x)) x = kNegInf;
  }
  return out;
}

void suppress_non_maxima(std::vector<double>& band_lp, int window) {
  std::vector<double> filtered(band_lp.size(), kNegInf);
  for (std::size_t i : nms_1d(band_lp, window)) filtered[i] = band_lp[i];
  if (std::none_of(filtered.begin(), filtered.end(),
                   [](double x) { return std::isfinite(x); })) {
    throw Error(ErrorKind::DegenerateDistribution, "no local maximum survived suppression");
  }
  band_lp = std::move(filtered);
}

struct Candidate {
  double score;
  std::size_t parent;
  TokenId token;
  double step_lp;
};

using StepFilter = std::function<void(std::vector<double>&, const TokenBand&)>;

std::vector<Beam> beam_search(const Scorer& scorer, const Grammar& grammar, int beams,
                              const StepFilter& filter) {
  if (beams < 1) throw Error(ErrorKind::InvalidArgument, "beam count must be >= 1");
  if (grammar.empty()) throw Error(ErrorKind::InvalidArgument, "empty grammar");

  std::vector<Beam> current(1);
  for (const TokenBand& band : grammar) {
    check_band(band, scorer.vocab_size());
    std::vector<Candidate> candidates;
    for (std::size_t b = 0; b < current.size(); ++b) {
      const std::vector<double> scores = call_scorer(scorer, current[b].tokens);
      std::vector<double> band_lp = band_scores(scores, band);
      if (filter) filter(band_lp, band);
      for (int i = 0; i < band.count; ++i) {
        if (!std::isfinite(band_lp[i])) continue;
        candidates.push_back({current[b].log_prob + band_lp[i], b, band.first + i, band_lp[i]});
      }
    }
    if (candidates.empty()) {
      throw Error(ErrorKind::DegenerateDistribution, "no finite candidate in band");
    }
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(beams));
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Beam> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Beam beam = current[c.parent];
      beam.tokens.push_back(c.token);
      beam.log_prob += c.step_lp;
      next.push_back(std::move(beam));
    }
    current = std::move(next);
  }
  return current;
}

}  // namespace

SyntheticScorer::SyntheticScorer(Grammar grammar, std::vector<StepMixture> steps,
                                 std::uint64_t seed, double noise, double off_band_mass,
                                 int vocab_size)
    : grammar_(std::move(grammar)), vocab_size_(vocab_size) {
  if (steps.size() != grammar_.size()) {
    throw Error(ErrorKind::InvalidArgument, "one mixture per grammar step required");
  }
  if (!(off_band_mass >= 0.0 && off_band_mass < 1.0) || !(noise >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid noise or off-band mass");
  }
  Rng rng(seed);
  log_probs_.reserve(steps.size());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const TokenBand& band = grammar_[s];
    check_band(band, vocab_size_);
    const StepMixture& mix = steps[s];
    double total_weight = 0.0;
    for (const auto& c : mix) {
      if (!(c.width > 0.0) || !(c.weight > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "mixture components need positive width/weight");
      }
      total_weight += c.weight;
    }
    if (mix.empty()) throw Error(ErrorKind::InvalidArgument, "empty mixture");

    std::vector<double> density(band.count, kNegInf);
    std::vector<double> component(band.count);
    for (const auto& c : mix) {
      for (int x = 0; x < band.count; ++x) {
        const double d = (x - c.center) / c.width;
        component[x] = -0.5 * d * d;
      }
      const double log_norm = log_sum_exp(component);
      const double log_w = std::log(c.weight / total_weight);
      for (int x = 0; x < band.count; ++x) {
        const double term = log_w + component[x] - log_norm;
        const double hi = std::max(density[x], term);
        const double lo = std::min(density[x], term);
        density[x] = lo == kNegInf ? hi : hi + std::log1p(std::exp(lo - hi));
      }
    }
    if (noise > 0.0) {
      for (double& x : density) x += uniform(rng, -noise, noise);
    }
    const double in_band_norm = log_sum_exp(density) - std::log1p(-off_band_mass);
    std::vector<double> lp(vocab_size_, kNegInf);
    const int off_count = vocab_size_ - band.count;
    if (off_band_mass > 0.0 && off_count > 0) {
      std::fill(lp.begin(), lp.end(), std::log(off_band_mass / off_count));
    }
    for (int x = 0; x < band.count; ++x) lp[band.first + x] = density[x] - in_band_norm;
    log_probs_.push_back(std::move(lp));
  }
}

std::vector<double> SyntheticScorer::score(std::span<const TokenId> prefix) const {
  if (prefix.size() >= log_probs_.size()) {
    throw Error(ErrorKind::StepOutOfRange,
                "synthetic scorer has no step " + std::to_string(prefix.size()), prefix.size());
  }
  return log_probs_[prefix.size()];
}

std::vector<std::size_t> nms_1d(std::span<const double> p, int window) {
  if (window < 1) throw Error(ErrorKind::InvalidArgument, "NMS window must be >= 1");
  const std::size_t n = p.size();
  const auto w = static_cast<std::size_t>(window);
  std::vector<std::size_t> survivors;
  // Sliding maximum over [i - w, i + w] with a monotone deque.
  std::deque<std::size_t> dq;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t right = std::min(n - 1, i + w);
    for (; next <= right; ++next) {
      if (std::isnan(p[next])) {
        throw Error(ErrorKind::InvalidArgument, "NaN in NMS input", next);
      }
      while (!dq.empty() && p[dq.back()] <= p[next]) dq.pop_back();
      dq.push_back(next);
    }
    const std::size_t left = i >= w ? i - w : 0;
    while (dq.front() < left) dq.pop_front();
    if (p[i] >= p[dq.front()]) survivors.push_back(i);
  }
  return survivors;
}

Beam decode_greedy(const Scorer& scorer, const Grammar& grammar) {
  if (grammar.empty()) throw Error(ErrorKind::InvalidArgument, "empty grammar");
  Beam beam;
  for (const TokenBand& band : grammar) {
    check_band(band, scorer.vocab_size());
    const std::vector<double> scores = call_scorer(scorer, beam.tokens);
    const std::vector<double> band_lp = band_scores(scores, band);
    // max_element keeps the first (lowest id) maximum.
    const auto best = std::max_element(band_lp.begin(), band_lp.end());
    if (!std::isfinite(*best)) {
      throw Error(ErrorKind::DegenerateDistribution, "no finite token in band",
                  beam.tokens.size());
    }
    beam.tokens.push_back(band.first + static_cast<TokenId>(best - band_lp.begin()));
    beam.log_prob += *best;
  }
  return beam;
}

std::vector<Beam> decode_sampling(const Scorer& scorer, const Grammar& grammar,
                                  double temperature, std::uint64_t seed, int k) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be > 0");
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "sample count must be >= 1");
  if (grammar.empty()) throw Error(ErrorKind::InvalidArgument, "empty grammar");
  Rng rng(seed);
  std::vector<Beam> out;
  out.reserve(k);
  std::vector<double> weights;
  for (int sample = 0; sample < k; ++sample) {
    Beam beam;
    for (const TokenBand& band : grammar) {
      check_band(band, scorer.vocab_size());
      const std::vector<double> scores = call_scorer(scorer, beam.tokens);
      const std::vector<double> band_lp = band_scores(scores, band);
      double m = kNegInf;
      for (double x : band_lp) m = std::max(m, x);
      if (!std::isfinite(m)) {
        throw Error(ErrorKind::DegenerateDistribution, "no finite token in band",
                    beam.tokens.size());
      }
      weights.assign(band_lp.size(), 0.0);
      double total = 0.0;
      for (std::size_t i = 0; i < band_lp.size(); ++i) {
        weights[i] = std::exp((band_lp[i] - m) / temperature);
        total += weights[i];
      }
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      std::size_t pick = 0;
      // Last positive-weight index guards against round-off at the tail.
      std::size_t last_positive = 0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) last_positive = i;
      }
      pick = last_positive;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (weights[i] > 0.0 && target < acc) {
          pick = i;
          break;
        }
      }
      beam.tokens.push_back(band.first + static_cast<TokenId>(pick));
      beam.log_prob += band_lp[pick];
    }
    out.push_back(std::move(beam));
  }
  return out;
}

std::vector<Beam> decode_beam(const Scorer& scorer, const Grammar& grammar, int beams) {
  return beam_search(scorer, grammar, beams, nullptr);
}

std::vector<Beam> decode_beam_nms(const Scorer& scorer, const Grammar& grammar, int beams,
                                  int window_loc, int window_seg) {
  if (window_loc < 1 || window_seg < 1) {
    throw Error(ErrorKind::InvalidArgument, "NMS windows must be >= 1");
  }
  return beam_search(scorer, grammar, beams,
                     [&](std::vector<double>& band_lp, const TokenBand& band) {
                       suppress_non_maxima(band_lp,
                                           band.kind == TokenKind::Loc ? window_loc : window_seg);
                     });
}

}  // namespace keypose
