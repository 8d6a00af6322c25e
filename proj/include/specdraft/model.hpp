#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "specdraft/distribution.hpp"

namespace specdraft {

// Fixed-size recurrent state. The payload length is set by the model's
// hyperparameters and never depends on how many tokens were absorbed.
struct DrafterState {
  std::vector<double> payload;
  std::size_t position = 0;

  std::size_t payload_bytes() const { return payload.size() * sizeof(double); }

  friend bool operator==(const DrafterState&, const DrafterState&) = default;
};

// A next-token model driven by a recurrent state. Both the tabular n-gram
// and the SSM implement this, and either can play target or drafter.
// Models are immutable after construction and safe to share across threads.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t state_dim() const = 0;

  // Absorbs `token` into `state` in place. Does not allocate when the
  // payload already has state_dim() entries.
  virtual void advance(DrafterState& state, TokenId token) const = 0;

  // Writes the next-token distribution for `state` into `probs`, which must
  // have vocab_size() entries. Does not allocate.
  virtual void predict(const DrafterState& state, std::span<double> probs) const = 0;

  DrafterState initial_state() const;
  void check_token(TokenId token) const;
};

struct StepResult {
  DrafterState state;
  Distribution next;
};

// Zero state advanced through `prefix`, left to right.
DrafterState drafter_init(const Model& model, std::span<const TokenId> prefix);

// Value-semantics step: `state` is left untouched.
StepResult drafter_step(const Model& model, const DrafterState& state, TokenId token);

Distribution next_distribution(const Model& model, const DrafterState& state);

std::vector<DrafterState> duplicate_state(const DrafterState& state, std::size_t copies);

// Copies into an existing state; no allocation when payload sizes match.
void copy_state(const DrafterState& from, DrafterState& to);

// One verification forward pass: the distributions after prefix,
// prefix+c1, ..., prefix+c1..cγ (γ+1 entries).
std::vector<Distribution> target_score_parallel(const Model& model, std::span<const TokenId> prefix,
                                                std::span<const TokenId> candidates);

// Same as target_score_parallel, starting from an already-absorbed prefix.
std::vector<Distribution> score_from_state(const Model& model, const DrafterState& prefix_state,
                                           std::span<const TokenId> candidates);

}  // namespace specdraft
