#include "specdraft/engine.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>

#include "specdraft/error.hpp"

namespace specdraft {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Times a phase only when enabled; the disabled path never reads a clock.
class PhaseTimer {
 public:
  explicit PhaseTimer(bool enabled) : enabled_(enabled) {
    if (enabled_) start_ = Clock::now();
  }
  double lap() {
    if (!enabled_) return 0.0;
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  bool enabled_;
  Clock::time_point start_;
};

constexpr StreamKey verify_key(std::uint64_t round) {
  return StreamKey{StreamPurpose::kVerify, round, 0, 0};
}

}  // namespace

Strategy parse_strategy(std::string_view text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string_view::npos) {
    fail(ErrorKind::kInvalidConfig, "strategy must look like seq:N, tree:W,... or bandit:A;B");
  }
  const std::string_view kind = text.substr(0, colon);
  std::string_view arg = text.substr(colon + 1);
  if (arg.size() >= 2 && arg.front() == '"' && arg.back() == '"') arg = arg.substr(1, arg.size() - 2);
  if (kind == "seq") {
    std::size_t gamma = 0;
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), gamma);
    if (ec != std::errc() || ptr != arg.data() + arg.size() || gamma == 0) {
      fail(ErrorKind::kInvalidConfig, "bad sequential draft length '" + std::string(arg) + "'");
    }
    return SequentialStrategy{gamma};
  }
  if (kind == "tree") return FixedTreeStrategy{TreeConfig::parse(arg)};
  if (kind == "bandit") {
    BanditStrategy b;
    b.arms = parse_config_list(arg);
    return b;
  }
  fail(ErrorKind::kInvalidConfig, "unknown strategy '" + std::string(kind) + "'");
}

std::string describe(const Strategy& strategy) {
  if (const auto* s = std::get_if<SequentialStrategy>(&strategy)) {
    return "seq:" + std::to_string(s->gamma);
  }
  if (const auto* t = std::get_if<FixedTreeStrategy>(&strategy)) {
    return "tree:" + t->config.to_string();
  }
  const auto& b = std::get<BanditStrategy>(strategy);
  std::string out = "bandit:";
  for (std::size_t i = 0; i < b.arms.size(); ++i) {
    if (i) out += ';';
    out += b.arms[i].to_string();
  }
  return out;
}

double RunMetrics::acceptance_length() const {
  if (target_forward_passes == 0) return 0.0;
  return static_cast<double>(committed_total) / static_cast<double>(target_forward_passes);
}

double RunMetrics::throughput() const {
  if (!(wall_time_s > 0.0)) return 0.0;
  return static_cast<double>(committed_total) / wall_time_s;
}

// ---------------------------------------------------------------------------
// Decoder

Decoder::Decoder(const Model& target, const Model& drafter, std::span<const TokenId> prompt,
                 DecodeMode mode, bool measure_timing)
    : target_(target),
      drafter_(drafter),
      mode_(mode),
      measure_timing_(measure_timing),
      context_(prompt.begin(), prompt.end()),
      drafter_state_(drafter_init(drafter, prompt)),
      target_state_(drafter_init(target, prompt)) {
  if (target.vocab_size() != drafter.vocab_size()) {
    fail(ErrorKind::kInvalidInput, "target and drafter must share a vocabulary size");
  }
}

StateCachePlan& Decoder::plan_for(const TreeConfig& config) {
  auto it = plans_.find(config);
  if (it == plans_.end()) {
    it = plans_
             .emplace(config, build_cache_plan(config, drafter_.state_dim(), drafter_.vocab_size()))
             .first;
  }
  return it->second;
}

VerifyOutcome Decoder::round_sequential(std::size_t gamma, RandomSource& rng, std::uint64_t round) {
  PhaseTimer timer(measure_timing_);
  const DraftSequence draft = draft_sequential(drafter_, drafter_state_, gamma, rng, round);
  timing_.draft_s = timer.lap();
  const std::vector<Distribution> scores = score_from_state(target_, target_state_, draft.tokens);
  timing_.score_s = timer.lap();
  rng.select_stream(verify_key(round));
  VerifyOutcome outcome = verify_sequential(scores, draft, mode_, rng);
  timing_.verify_s = timer.lap();
  return outcome;
}

VerifyOutcome Decoder::round_tree(const TreeConfig& config, RandomSource& rng, std::uint64_t round) {
  StateCachePlan& plan = plan_for(config);
  PhaseTimer timer(measure_timing_);
  const DraftTree& tree = draft_tree(drafter_, drafter_state_, plan, rng, round);
  timing_.draft_s = timer.lap();
  const TreeScores scores = score_tree(target_, target_state_, tree);
  timing_.score_s = timer.lap();
  rng.select_stream(verify_key(round));
  VerifyOutcome outcome = verify_tree(scores, tree, mode_, rng);
  timing_.verify_s = timer.lap();
  return outcome;
}

void Decoder::commit(std::span<const TokenId> tokens) {
  for (TokenId t : tokens) {
    drafter_.advance(drafter_state_, t);
    target_.advance(target_state_, t);
    context_.push_back(t);
  }
}

// ---------------------------------------------------------------------------
// generate

GenerationResult generate(const Model& target, const Model& drafter,
                          std::span<const TokenId> prompt, const GenerationConfig& config) {
  if (config.max_new_tokens == 0) fail(ErrorKind::kInvalidConfig, "max_new_tokens must be >= 1");
  for (TokenId t : prompt) target.check_token(t);

  const auto start = Clock::now();
  Decoder decoder(target, drafter, prompt, config.mode, config.measure_timing);
  KeyedRandom rng(config.seed);

  std::optional<BanditState> bandit;
  std::optional<double> fixed_lambda_gamma;
  double lambda_gamma_fallback = 0.0;
  if (const auto* b = std::get_if<BanditStrategy>(&config.strategy)) {
    bandit.emplace(b->arms, b->lambda_ucb);
    fixed_lambda_gamma = b->lambda_gamma;
    lambda_gamma_fallback = b->lambda_gamma_fallback;
  }
  LambdaGammaEstimator lambda_estimator;

  GenerationResult result;
  RunMetrics& metrics = result.metrics;
  metrics.arm_selections.assign(bandit ? bandit->arm_count() : 1, 0);
  result.tokens.reserve(config.max_new_tokens);

  bool stopped = false;
  for (std::uint64_t round = 0; !stopped && result.tokens.size() < config.max_new_tokens; ++round) {
    RoundRecord record;
    VerifyOutcome outcome;
    if (const auto* s = std::get_if<SequentialStrategy>(&config.strategy)) {
      record.gamma = s->gamma;
      record.drafted_nodes = s->gamma;
      outcome = decoder.round_sequential(s->gamma, rng, round);
    } else {
      const TreeConfig& tree_config = bandit ? bandit->arm(record.arm = bandit->select_arm())
                                             : std::get<FixedTreeStrategy>(config.strategy).config;
      record.gamma = tree_config.gamma();
      for (std::size_t b : batch_sizes(tree_config)) record.drafted_nodes += b;
      outcome = decoder.round_tree(tree_config, rng, round);
    }
    ++metrics.target_forward_passes;

    const std::size_t remaining = config.max_new_tokens - result.tokens.size();
    std::size_t take = std::min(outcome.committed.size(), remaining);
    for (std::size_t i = 0; i < take; ++i) {
      if (std::find(config.stop_tokens.begin(), config.stop_tokens.end(), outcome.committed[i]) !=
          config.stop_tokens.end()) {
        take = i + 1;
        stopped = true;
        break;
      }
    }
    const std::span<const TokenId> appended(outcome.committed.data(), take);
    decoder.commit(appended);
    result.tokens.insert(result.tokens.end(), appended.begin(), appended.end());

    const RoundTiming& timing = decoder.last_timing();
    record.accepted_drafts = outcome.n_accepted_drafts;
    record.committed = take;
    record.draft_time_s = timing.draft_s;
    record.score_time_s = timing.score_s;
    record.verify_time_s = timing.verify_s;
    metrics.draft_time_s += timing.draft_s;
    metrics.verify_time_s += timing.score_s + timing.verify_s;
    metrics.committed_total += take;
    ++metrics.arm_selections[record.arm];

    if (bandit) {
      if (config.measure_timing && timing.draft_s > 0.0 && timing.score_s > 0.0) {
        lambda_estimator.observe(timing.draft_s / static_cast<double>(record.gamma), timing.score_s);
      }
      const double lambda_gamma = fixed_lambda_gamma
                                      ? *fixed_lambda_gamma
                                      : (config.measure_timing
                                             ? lambda_estimator.value_or(lambda_gamma_fallback)
                                             : lambda_gamma_fallback);
      record.reward = compute_reward(
          RoundOutcome{record.arm, outcome.committed.size(), record.gamma}, lambda_gamma);
      bandit->update(record.arm, record.reward);
    }
    metrics.rounds.push_back(record);
  }
  metrics.wall_time_s = config.measure_timing ? seconds_since(start) : 0.0;
  return result;
}

std::vector<TokenId> target_only_decode(const Model& target, std::span<const TokenId> prompt,
                                        std::size_t max_new_tokens, DecodeMode mode,
                                        std::uint64_t seed) {
  DrafterState state = drafter_init(target, prompt);
  KeyedRandom rng(seed);
  std::vector<double> probs(target.vocab_size());
  std::vector<TokenId> out;
  out.reserve(max_new_tokens);
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    target.predict(state, probs);
    TokenId next = 0;
    if (mode == DecodeMode::kGreedy) {
      next = argmax(probs);
    } else {
      rng.select_stream({StreamPurpose::kTargetOnly, step, 0, 0});
      next = static_cast<TokenId>(rng.categorical(probs));
    }
    out.push_back(next);
    target.advance(state, next);
  }
  return out;
}

}  // namespace specdraft
