#include "specdraft/model.hpp"

#include <algorithm>
#include <string>

#include "specdraft/error.hpp"

namespace specdraft {

DrafterState Model::initial_state() const {
  return DrafterState{std::vector<double>(state_dim(), 0.0), 0};
}

void Model::check_token(TokenId token) const {
  if (token >= vocab_size()) {
    fail(ErrorKind::kInvalidInput, "token " + std::to_string(token) +
                                       " outside vocabulary of size " +
                                       std::to_string(vocab_size()));
  }
}

DrafterState drafter_init(const Model& model, std::span<const TokenId> prefix) {
  DrafterState state = model.initial_state();
  for (TokenId t : prefix) model.advance(state, t);
  return state;
}

StepResult drafter_step(const Model& model, const DrafterState& state, TokenId token) {
  DrafterState next = state;
  model.advance(next, token);
  Distribution dist = next_distribution(model, next);
  return StepResult{std::move(next), std::move(dist)};
}

Distribution next_distribution(const Model& model, const DrafterState& state) {
  std::vector<double> probs(model.vocab_size());
  model.predict(state, probs);
  return Distribution::normalized(std::move(probs));
}

std::vector<DrafterState> duplicate_state(const DrafterState& state, std::size_t copies) {
  if (copies == 0) fail(ErrorKind::kInvalidArgument, "duplicate_state needs at least one copy");
  return std::vector<DrafterState>(copies, state);
}

void copy_state(const DrafterState& from, DrafterState& to) {
  if (to.payload.size() == from.payload.size()) {
    std::copy(from.payload.begin(), from.payload.end(), to.payload.begin());
  } else {
    to.payload = from.payload;
  }
  to.position = from.position;
}

std::vector<Distribution> target_score_parallel(const Model& model, std::span<const TokenId> prefix,
                                                std::span<const TokenId> candidates) {
  for (TokenId t : candidates) model.check_token(t);
  return score_from_state(model, drafter_init(model, prefix), candidates);
}

std::vector<Distribution> score_from_state(const Model& model, const DrafterState& prefix_state,
                                           std::span<const TokenId> candidates) {
  for (TokenId t : candidates) model.check_token(t);
  std::vector<Distribution> out;
  out.reserve(candidates.size() + 1);
  DrafterState state = prefix_state;
  out.push_back(next_distribution(model, state));
  for (TokenId t : candidates) {
    model.advance(state, t);
    out.push_back(next_distribution(model, state));
  }
  return out;
}

}  // namespace specdraft
