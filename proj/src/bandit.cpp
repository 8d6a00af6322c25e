#include "specdraft/bandit.hpp"

#include <cmath>
#include <set>
#include <string>

#include "specdraft/error.hpp"

namespace specdraft {

BanditState::BanditState(std::vector<TreeConfig> arms, double lambda_ucb)
    : arms_(std::move(arms)),
      counts_(arms_.size(), 0),
      reward_sums_(arms_.size(), 0.0),
      lambda_ucb_(lambda_ucb) {
  if (arms_.empty()) fail(ErrorKind::kInvalidState, "bandit needs at least one arm");
  if (std::set<TreeConfig>(arms_.begin(), arms_.end()).size() != arms_.size()) {
    fail(ErrorKind::kInvalidConfig, "bandit arms must be distinct");
  }
  if (!(lambda_ucb >= 0.0)) fail(ErrorKind::kInvalidConfig, "lambda_ucb must be non-negative");
}

double BanditState::mean_reward(std::size_t k) const {
  if (counts_.at(k) == 0) return 0.0;
  return reward_sums_[k] / static_cast<double>(counts_[k]);
}

std::size_t BanditState::select_arm() const {
  for (std::size_t k = 0; k < arms_.size(); ++k) {
    if (counts_[k] == 0) return k;
  }
  const double log_t = std::log(static_cast<double>(std::max<std::uint64_t>(rounds_, 1)));
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t k = 0; k < arms_.size(); ++k) {
    const double bonus = std::sqrt(2.0 * log_t / static_cast<double>(counts_[k]));
    const double score = mean_reward(k) + lambda_ucb_ * bonus;
    if (k == 0 || score > best_score) {
      best = k;
      best_score = score;
    }
  }
  return best;
}

void BanditState::update(std::size_t arm, double reward) {
  if (arm >= arms_.size()) fail(ErrorKind::kInvalidInput, "arm index out of range");
  ++counts_[arm];
  reward_sums_[arm] += reward;
  ++rounds_;
}

void BanditState::restore(std::vector<std::uint64_t> counts, std::vector<double> reward_sums,
                          std::uint64_t rounds) {
  if (counts.size() != arms_.size() || reward_sums.size() != arms_.size()) {
    fail(ErrorKind::kInvalidState, "bandit statistics do not match the arm set");
  }
  counts_ = std::move(counts);
  reward_sums_ = std::move(reward_sums);
  rounds_ = rounds;
}

double compute_reward(const RoundOutcome& outcome, double lambda_gamma) {
  if (outcome.committed_tokens == 0) {
    fail(ErrorKind::kInvalidInput, "a round always commits at least one token");
  }
  if (!(lambda_gamma >= 0.0)) fail(ErrorKind::kInvalidInput, "lambda_gamma must be non-negative");
  const double n = static_cast<double>(outcome.committed_tokens);
  return -(1.0 / n + lambda_gamma * static_cast<double>(outcome.gamma) / n);
}

LambdaGammaEstimator::LambdaGammaEstimator(double smoothing) : smoothing_(smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    fail(ErrorKind::kInvalidArgument, "smoothing must be in [0, 1)");
  }
}

void LambdaGammaEstimator::observe(double draft_seconds_per_token, double target_seconds) {
  if (!(draft_seconds_per_token > 0.0) || !(target_seconds > 0.0)) {
    fail(ErrorKind::kInvalidInput, "timings must be positive");
  }
  const double ratio = draft_seconds_per_token / target_seconds;
  value_ = value_ ? smoothing_ * *value_ + (1.0 - smoothing_) * ratio : ratio;
}

double estimate_lambda_gamma(std::span<const TimingSample> samples, double smoothing) {
  if (samples.empty()) fail(ErrorKind::kInvalidInput, "need at least one timing sample");
  LambdaGammaEstimator estimator(smoothing);
  for (const TimingSample& s : samples) estimator.observe(s.draft_seconds_per_token, s.target_seconds);
  return *estimator.estimate();
}

}  // namespace specdraft
