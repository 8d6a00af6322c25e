#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "specdraft/draft_tree.hpp"

namespace specdraft {

// UCB1 statistics over a fixed set of tree configurations. Rewards are
// averaged per arm; `rounds` counts completed rounds (the t of the index).
class BanditState {
 public:
  explicit BanditState(std::vector<TreeConfig> arms, double lambda_ucb = 1.0);

  std::size_t arm_count() const { return arms_.size(); }
  const TreeConfig& arm(std::size_t k) const { return arms_.at(k); }
  std::span<const TreeConfig> arms() const { return arms_; }
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::span<const double> reward_sums() const { return reward_sums_; }
  std::uint64_t rounds() const { return rounds_; }
  double lambda_ucb() const { return lambda_ucb_; }

  double mean_reward(std::size_t k) const;

  // Lowest-index untried arm first; afterwards
  // argmax_k mean_k + lambda_ucb * sqrt(2 ln t / n_k), ties to the lowest k.
  std::size_t select_arm() const;

  void update(std::size_t arm, double reward);

  // For tests and carry-over: sets raw statistics directly.
  void restore(std::vector<std::uint64_t> counts, std::vector<double> reward_sums,
               std::uint64_t rounds);

 private:
  std::vector<TreeConfig> arms_;
  std::vector<std::uint64_t> counts_;
  std::vector<double> reward_sums_;
  std::uint64_t rounds_ = 0;
  double lambda_ucb_;
};

struct RoundOutcome {
  std::size_t arm = 0;
  std::size_t committed_tokens = 0;  // accepted drafts + the resampled/bonus token
  std::size_t gamma = 0;
};

// -(1 + lambda_gamma * gamma) / committed_tokens: the negated inverse speedup
// of one round with the verification pass normalized to one target step.
double compute_reward(const RoundOutcome& outcome, double lambda_gamma);

// Exponentially weighted estimate of T_draft / T_target; the first
// observation initializes the estimate.
class LambdaGammaEstimator {
 public:
  explicit LambdaGammaEstimator(double smoothing = 0.9);

  void observe(double draft_seconds_per_token, double target_seconds);
  std::optional<double> estimate() const { return value_; }
  double value_or(double fallback) const { return value_.value_or(fallback); }

 private:
  double smoothing_;
  std::optional<double> value_;
};

struct TimingSample {
  double draft_seconds_per_token = 0.0;
  double target_seconds = 0.0;
};

double estimate_lambda_gamma(std::span<const TimingSample> samples, double smoothing = 0.9);

}  // namespace specdraft
