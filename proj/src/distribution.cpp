#include "specdraft/distribution.hpp"

#include <cmath>
#include <string>

#include "specdraft/error.hpp"

namespace specdraft {

Distribution Distribution::from_probs(std::vector<double> probs, double tolerance) {
  if (probs.empty()) fail(ErrorKind::kInvalidInput, "empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      fail(ErrorKind::kInvariantViolation, "distribution has a negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > tolerance) {
    fail(ErrorKind::kInvariantViolation,
         "distribution sums to " + std::to_string(total) + ", expected 1");
  }
  normalize_in_place(probs);
  return Distribution(std::move(probs));
}

Distribution Distribution::normalized(std::vector<double> weights) {
  if (weights.empty()) fail(ErrorKind::kInvalidInput, "empty distribution");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      fail(ErrorKind::kInvariantViolation, "weights must be finite and non-negative");
    }
  }
  normalize_in_place(weights);
  return Distribution(std::move(weights));
}

Distribution Distribution::one_hot(std::size_t vocab_size, TokenId token) {
  if (token >= vocab_size) fail(ErrorKind::kInvalidInput, "one-hot token out of range");
  std::vector<double> probs(vocab_size, 0.0);
  probs[token] = 1.0;
  return Distribution(std::move(probs));
}

TokenId Distribution::argmax() const { return specdraft::argmax(probs_); }

TokenId argmax(std::span<const double> probs) {
  if (probs.empty()) fail(ErrorKind::kInvalidInput, "argmax of empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

void normalize_in_place(std::span<double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) fail(ErrorKind::kInvalidInput, "cannot normalize zero weights");
  // Already normalized up to rounding: leave the values bit-for-bit, so a
  // row normalizes to the same numbers however often it passes through.
  if (std::abs(total - 1.0) <= 1e-12) return;
  for (double& w : weights) w /= total;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kInvalidInput, "total variation of unequal lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

}  // namespace specdraft
