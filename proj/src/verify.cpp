#include "specdraft/verify.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specdraft/error.hpp"

namespace specdraft {

namespace {
constexpr double kResidualZero = 1e-12;
}

void DraftSequence::validate() const {
  if (tokens.empty()) fail(ErrorKind::kInvalidInput, "draft must contain at least one token");
  if (q_probs.size() != tokens.size() || q_dists.size() != tokens.size()) {
    fail(ErrorKind::kInvalidInput, "draft tokens, q_probs and q_dists differ in length");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= q_dists[i].size()) fail(ErrorKind::kInvalidInput, "draft token out of range");
    if (std::abs(q_dists[i][tokens[i]] - q_probs[i]) > 1e-12) {
      fail(ErrorKind::kInvalidInput,
           "q_probs[" + std::to_string(i) + "] does not match its drafter distribution");
    }
  }
}

void apply_residual(std::span<double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(ErrorKind::kInvalidInput, "residual of unequal lengths");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::max(0.0, p[i] - q[i]);
  if (total <= kResidualZero) return;
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::max(0.0, p[i] - q[i]) / total;
}

Distribution residual_distribution(const Distribution& p, const Distribution& q) {
  std::vector<double> out(p.probs().begin(), p.probs().end());
  apply_residual(out, q.probs());
  return Distribution::normalized(std::move(out));
}

double acceptance_probability(double p_t, double q_t) {
  if (!(q_t > 0.0)) {
    fail(ErrorKind::kInvalidInput, "draft token has zero drafter probability");
  }
  return std::min(1.0, p_t / q_t);
}

bool accept_token(double p_t, double q_t, double u) { return u < acceptance_probability(p_t, q_t); }

VerifyOutcome verify_sequential(std::span<const Distribution> target_dists,
                                const DraftSequence& draft, DecodeMode mode, RandomSource& rng) {
  draft.validate();
  const std::size_t gamma = draft.gamma();
  if (target_dists.size() != gamma + 1) {
    fail(ErrorKind::kInvalidInput, "expected " + std::to_string(gamma + 1) +
                                       " target distributions, got " +
                                       std::to_string(target_dists.size()));
  }
  for (std::size_t i = 0; i <= gamma; ++i) {
    if (target_dists[i].size() != draft.q_dists[std::min(i, gamma - 1)].size()) {
      fail(ErrorKind::kInvalidInput, "target and drafter vocabularies differ");
    }
  }

  VerifyOutcome out;
  out.committed.reserve(gamma + 1);
  for (std::size_t i = 0; i < gamma; ++i) {
    const TokenId token = draft.tokens[i];
    const Distribution& p = target_dists[i];
    if (mode == DecodeMode::kGreedy) {
      const TokenId best = p.argmax();
      if (token != best) {
        out.committed.push_back(best);
        return out;
      }
    } else if (!rng.bernoulli(acceptance_probability(p[token], draft.q_probs[i]))) {
      std::vector<double> residual(p.probs().begin(), p.probs().end());
      apply_residual(residual, draft.q_dists[i].probs());
      out.committed.push_back(static_cast<TokenId>(rng.categorical(residual)));
      return out;
    }
    out.committed.push_back(token);
    ++out.n_accepted_drafts;
  }
  const Distribution& tail = target_dists[gamma];
  out.committed.push_back(mode == DecodeMode::kGreedy
                              ? tail.argmax()
                              : static_cast<TokenId>(rng.categorical(tail.probs())));
  out.used_bonus = true;
  return out;
}

}  // namespace specdraft
