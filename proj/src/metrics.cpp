#include "specdraft/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "specdraft/error.hpp"

namespace specdraft {

double acceptance_length_expectation(double beta, std::size_t gamma) {
  if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorKind::kInvalidArgument, "beta must be in [0, 1]");
  if (gamma == 0) fail(ErrorKind::kInvalidArgument, "gamma must be at least 1");
  if (beta == 1.0) return static_cast<double>(gamma) + 1.0;
  return 1.0 + beta * (1.0 - std::pow(beta, static_cast<double>(gamma))) / (1.0 - beta);
}

double round_speedup(std::size_t n_accept, std::size_t gamma, double t_target_per_pass,
                     double t_draft_per_token) {
  if (!(t_target_per_pass > 0.0) || !(t_draft_per_token >= 0.0)) {
    fail(ErrorKind::kInvalidInput, "timings must be positive");
  }
  return static_cast<double>(n_accept) * t_target_per_pass /
         (t_target_per_pass + static_cast<double>(gamma) * t_draft_per_token);
}

double speedup_estimate(const RunMetrics& metrics, double t_target_per_pass,
                        double t_draft_per_token) {
  if (!(t_target_per_pass > 0.0) || !(t_draft_per_token >= 0.0)) {
    fail(ErrorKind::kInvalidInput, "timings must be positive");
  }
  if (metrics.rounds.empty()) fail(ErrorKind::kInvalidInput, "no rounds to average");
  double total = 0.0;
  for (const RoundRecord& r : metrics.rounds) {
    total += round_speedup(r.accepted_drafts + 1, r.gamma, t_target_per_pass, t_draft_per_token);
  }
  return total / static_cast<double>(metrics.rounds.size());
}

double expected_calibration_error(std::span<const CalibrationPair> pairs, std::size_t bins) {
  if (pairs.empty()) fail(ErrorKind::kInvalidInput, "ECE of an empty set");
  if (bins == 0) fail(ErrorKind::kInvalidArgument, "ECE needs at least one bin");
  std::vector<double> confidence_sum(bins, 0.0);
  std::vector<double> correct_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (const CalibrationPair& p : pairs) {
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
      fail(ErrorKind::kInvalidInput, "confidence outside [0, 1]");
    }
    const auto b = std::min(bins - 1, static_cast<std::size_t>(p.confidence * static_cast<double>(bins)));
    confidence_sum[b] += p.confidence;
    correct_sum[b] += p.correct ? 1.0 : 0.0;
    ++count[b];
  }
  const double n = static_cast<double>(pairs.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double size = static_cast<double>(count[b]);
    ece += (size / n) * std::abs(correct_sum[b] / size - confidence_sum[b] / size);
  }
  return ece;
}

std::vector<CalibrationPair> drafter_calibration_pairs(
    const Model& target, const Model& drafter, std::span<const std::vector<TokenId>> contexts) {
  if (target.vocab_size() != drafter.vocab_size()) {
    fail(ErrorKind::kInvalidInput, "target and drafter must share a vocabulary size");
  }
  std::vector<CalibrationPair> pairs;
  pairs.reserve(contexts.size());
  std::vector<double> p(target.vocab_size());
  std::vector<double> q(drafter.vocab_size());
  for (const auto& context : contexts) {
    target.predict(drafter_init(target, context), p);
    drafter.predict(drafter_init(drafter, context), q);
    const TokenId top = argmax(q);
    pairs.push_back({q[top], top == argmax(p)});
  }
  return pairs;
}

}  // namespace specdraft
