#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "specdraft/engine.hpp"
#include "specdraft/model.hpp"

namespace specdraft {

// Expected committed tokens per round when every draft is accepted
// independently with probability beta: 1 + beta (1 - beta^gamma) / (1 - beta).
double acceptance_length_expectation(double beta, std::size_t gamma);

// N_accept * T_target / (T_target + gamma * T_draft) for one round.
double round_speedup(std::size_t n_accept, std::size_t gamma, double t_target_per_pass,
                     double t_draft_per_token);

// Mean of round_speedup over the rounds in `metrics`, with N_accept the
// committed count (accepted drafts + 1) of each round.
double speedup_estimate(const RunMetrics& metrics, double t_target_per_pass,
                        double t_draft_per_token);

struct CalibrationPair {
  double confidence = 0.0;
  bool correct = false;
};

// Equal-width binned ECE over [0, 1]; a confidence of exactly 1 lands in the last bin.
double expected_calibration_error(std::span<const CalibrationPair> pairs, std::size_t bins);

// Drafter top-1 probability against whether the drafter's top-1 matches the
// target's top-1, one pair per context.
std::vector<CalibrationPair> drafter_calibration_pairs(
    const Model& target, const Model& drafter, std::span<const std::vector<TokenId>> contexts);

}  // namespace specdraft
