#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "specdraft/engine.hpp"
#include "specdraft/tabular_model.hpp"

namespace specdraft::testing {

using SequenceDist = std::map<std::vector<TokenId>, double>;

struct ModelPair {
  std::shared_ptr<const TabularModel> target;
  std::shared_ptr<const TabularModel> drafter;
};

// Target from Dirichlet(concentration) rows; the drafter shares the base
// draw and mixes in `perturb_weight` of an independent one.
ModelPair tabular_pair(std::uint64_t seed, std::size_t vocab, std::size_t order,
                       double concentration, double perturb_weight);

// Exact distribution of the next `horizon` tokens under plain ancestral
// sampling from `model`.
SequenceDist autoregressive_distribution(const Model& model, std::span<const TokenId> prompt,
                                         std::size_t horizon);

// One decoding round, run against `decoder` with `rng`.
using RoundFn = std::function<VerifyOutcome(Decoder&, RandomSource&)>;

// Exact distribution of the first `horizon` generated tokens when rounds
// are repeated until at least `horizon` tokens are committed. Each round is
// enumerated exhaustively; rounds are chained as a Markov process over the
// committed prefix.
SequenceDist speculative_distribution(const Model& target, const Model& drafter,
                                      std::span<const TokenId> prompt, std::size_t horizon,
                                      DecodeMode mode, const RoundFn& round);

}  // namespace specdraft::testing
