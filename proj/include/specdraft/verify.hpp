#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "specdraft/distribution.hpp"
#include "specdraft/random.hpp"

namespace specdraft {

enum class DecodeMode { kGreedy, kSampling };

// γ drafted tokens with the drafter distribution each was sampled from.
struct DraftSequence {
  std::vector<TokenId> tokens;
  std::vector<double> q_probs;
  std::vector<Distribution> q_dists;

  std::size_t gamma() const { return tokens.size(); }
  // Throws kInvalidInput unless the three vectors agree and
  // q_probs[i] == q_dists[i][tokens[i]].
  void validate() const;
};

struct VerifyOutcome {
  // Accepted draft prefix followed by exactly one resampled or bonus token.
  std::vector<TokenId> committed;
  std::size_t n_accepted_drafts = 0;
  bool used_bonus = false;

  friend bool operator==(const VerifyOutcome&, const VerifyOutcome&) = default;
};

// normalize(max(0, p - q)); returns p when the positive part is (numerically) zero.
Distribution residual_distribution(const Distribution& p, const Distribution& q);

// In-place form used on the hot path: p <- residual(p, q).
void apply_residual(std::span<double> p, std::span<const double> q);

// min(1, p_t / q_t). q_t must be positive.
double acceptance_probability(double p_t, double q_t);

// u < min(1, p_t / q_t).
bool accept_token(double p_t, double q_t, double u);

// Verifies the draft left to right. `target_dists` holds γ+1 entries, the
// last one being the tail distribution for the bonus token. Sampling mode
// draws one Bernoulli per visited draft position and one categorical for
// the final token, all from `rng`'s current stream. Greedy mode consumes no
// randomness.
VerifyOutcome verify_sequential(std::span<const Distribution> target_dists,
                                const DraftSequence& draft, DecodeMode mode, RandomSource& rng);

}  // namespace specdraft
