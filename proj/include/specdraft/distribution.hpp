#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace specdraft {

using TokenId = std::uint32_t;

// Probability vector over a vocabulary. Construction validates and then
// renormalizes, so every instance sums to 1 within 1e-9 and has no negative
// entries.
class Distribution {
 public:
  Distribution() = default;

  // Accepts rows whose sum is within `tolerance` of 1.
  static Distribution from_probs(std::vector<double> probs, double tolerance = 1e-9);
  // Any non-negative weights with a positive sum.
  static Distribution normalized(std::vector<double> weights);
  static Distribution one_hot(std::size_t vocab_size, TokenId token);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  // Lowest token id among the maxima.
  TokenId argmax() const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

TokenId argmax(std::span<const double> probs);

// Scales `weights` in place to sum to one (left untouched when already within
// 1e-12 of one). Throws when the sum is not positive.
void normalize_in_place(std::span<double> weights);

double total_variation(std::span<const double> a, std::span<const double> b);

}  // namespace specdraft
