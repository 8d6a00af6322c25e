#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "specdraft/bandit.hpp"
#include "specdraft/draft_tree.hpp"
#include "specdraft/model.hpp"
#include "specdraft/verify.hpp"

namespace specdraft {

struct SequentialStrategy {
  std::size_t gamma = 5;
};

struct FixedTreeStrategy {
  TreeConfig config;
};

struct BanditStrategy {
  std::vector<TreeConfig> arms;
  double lambda_ucb = 1.0;
  std::optional<double> lambda_gamma;  // nullopt: online estimate ("auto")
  double lambda_gamma_fallback = 0.05;
};

using Strategy = std::variant<SequentialStrategy, FixedTreeStrategy, BanditStrategy>;

// "seq:5", "tree:3,2,2,1,1", "bandit:3,3,2,1;3,2,2,1,1"
Strategy parse_strategy(std::string_view text);
std::string describe(const Strategy& strategy);

struct GenerationConfig {
  DecodeMode mode = DecodeMode::kSampling;
  Strategy strategy = SequentialStrategy{};
  std::size_t max_new_tokens = 128;
  std::vector<TokenId> stop_tokens;
  std::uint64_t seed = 0;
  // When false no clocks are read: timings are reported as zero and an
  // "auto" lambda_gamma uses its fallback, which keeps bandit runs
  // reproducible.
  bool measure_timing = true;
};

struct RoundRecord {
  std::size_t arm = 0;
  std::size_t gamma = 0;
  std::size_t drafted_nodes = 0;
  std::size_t accepted_drafts = 0;
  std::size_t committed = 0;  // appended to the output after truncation
  double reward = 0.0;        // bandit reward; zero for fixed strategies
  double draft_time_s = 0.0;
  double score_time_s = 0.0;
  double verify_time_s = 0.0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct RunMetrics {
  std::size_t committed_total = 0;
  std::size_t target_forward_passes = 0;
  double wall_time_s = 0.0;
  double draft_time_s = 0.0;
  double verify_time_s = 0.0;  // scoring plus verification
  std::vector<RoundRecord> rounds;
  std::vector<std::uint64_t> arm_selections;

  // Committed tokens per target forward pass.
  double acceptance_length() const;
  double throughput() const;
};

struct GenerationResult {
  std::vector<TokenId> tokens;  // newly generated tokens only
  RunMetrics metrics;
};

struct RoundTiming {
  double draft_s = 0.0;
  double score_s = 0.0;
  double verify_s = 0.0;
};

// One generation session. Holds the committed context and the target and
// drafter states positioned after it; every round drafts from a copy, so
// speculative branches never touch the committed states.
class Decoder {
 public:
  Decoder(const Model& target, const Model& drafter, std::span<const TokenId> prompt,
          DecodeMode mode, bool measure_timing = false);

  VerifyOutcome round_sequential(std::size_t gamma, RandomSource& rng, std::uint64_t round);
  VerifyOutcome round_tree(const TreeConfig& config, RandomSource& rng, std::uint64_t round);

  // Advances both states through `tokens`.
  void commit(std::span<const TokenId> tokens);

  std::span<const TokenId> context() const { return context_; }
  const DrafterState& drafter_state() const { return drafter_state_; }
  const DrafterState& target_state() const { return target_state_; }
  const RoundTiming& last_timing() const { return timing_; }
  StateCachePlan& plan_for(const TreeConfig& config);

 private:
  const Model& target_;
  const Model& drafter_;
  DecodeMode mode_;
  bool measure_timing_;
  std::vector<TokenId> context_;
  DrafterState drafter_state_;
  DrafterState target_state_;
  std::map<TreeConfig, StateCachePlan> plans_;
  RoundTiming timing_;
};

GenerationResult generate(const Model& target, const Model& drafter,
                          std::span<const TokenId> prompt, const GenerationConfig& config);

// Reference decoding without a drafter: argmax per step, or one categorical
// draw per step from stream {kTargetOnly, step}.
std::vector<TokenId> target_only_decode(const Model& target, std::span<const TokenId> prompt,
                                        std::size_t max_new_tokens, DecodeMode mode,
                                        std::uint64_t seed = 0);

}  // namespace specdraft
