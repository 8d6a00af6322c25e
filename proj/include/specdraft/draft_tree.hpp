#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specdraft/model.hpp"
#include "specdraft/random.hpp"
#include "specdraft/verify.hpp"

namespace specdraft {

// Per-depth branching widths (N_1, ..., N_γ).
class TreeConfig {
 public:
  explicit TreeConfig(std::vector<std::size_t> widths);

  // "3,2,2,1,1"
  static TreeConfig parse(std::string_view text);
  static TreeConfig sequential(std::size_t gamma);

  std::span<const std::size_t> widths() const { return widths_; }
  std::size_t width(std::size_t depth) const { return widths_[depth - 1]; }  // depth is 1-based
  std::size_t gamma() const { return widths_.size(); }
  bool is_path() const;
  std::string to_string() const;

  friend auto operator<=>(const TreeConfig&, const TreeConfig&) = default;

 private:
  std::vector<std::size_t> widths_;
};

// "3,3,2,1;3,2,2,1,1"
std::vector<TreeConfig> parse_config_list(std::string_view text);

// Cumulative products B_i = N_1 * ... * N_i.
std::vector<std::size_t> batch_sizes(const TreeConfig& config);

class StateCachePlan;

inline constexpr std::uint32_t kRootParent = std::numeric_limits<std::uint32_t>::max();

struct TreeNode {
  TokenId token = 0;
  double q_prob = 0.0;  // drafter probability before any without-replacement renormalization
  std::uint32_t parent = kRootParent;
  std::uint32_t depth = 0;  // 1..γ
};

// Level-ordered draft tree. Depth d occupies the contiguous node range
// [level_begin(d), level_begin(d) + B_d); the children of the node at
// position k within its level are positions [k*N_{d+1}, (k+1)*N_{d+1}) of
// the next level, in the order they were sampled.
class DraftTree {
 public:
  DraftTree(TreeConfig config, std::size_t vocab_size);

  const TreeConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::span<const TreeNode> nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }

  std::size_t level_begin(std::size_t depth) const { return level_begin_[depth - 1]; }
  std::size_t level_size(std::size_t depth) const { return batch_[depth - 1]; }
  std::size_t first_child(std::size_t node) const;

  // Drafter distribution at the root (what depth-1 tokens were drawn from).
  std::span<const double> root_next() const { return {next_.data(), vocab_size_}; }
  // Drafter distribution after absorbing `node`'s token.
  std::span<const double> next_after(std::size_t node) const {
    return {next_.data() + (node + 1) * vocab_size_, vocab_size_};
  }
  // The distribution `node` was sampled from (its parent's next distribution).
  std::span<const double> q_dist(std::size_t node) const;

  std::vector<TokenId> path_to(std::size_t node) const;

  // Only for (1, ..., 1) trees.
  DraftSequence as_sequence() const;

 private:
  friend const DraftTree& draft_tree(const Model&, const DrafterState&, StateCachePlan&,
                                     RandomSource&, std::uint64_t);

  TreeConfig config_;
  std::size_t vocab_size_;
  std::vector<std::size_t> batch_;
  std::vector<std::size_t> level_begin_;
  std::vector<TreeNode> nodes_;
  std::vector<double> next_;  // (node_count + 1) x vocab; row 0 is the root
};

// A proposal distribution for drawing siblings without replacement: q with
// already-drawn tokens removed and renormalized. When the remaining mass is
// zero it falls back to uniform over the undrawn tokens. The drafter and
// the tree verifier share this bookkeeping.
class WithoutReplacement {
 public:
  explicit WithoutReplacement(std::size_t vocab_size);

  void reset(std::span<const double> q);
  // Probability of `token` under the current proposal.
  double probability(TokenId token) const;
  std::size_t draw(RandomSource& rng) const;
  void remove(TokenId token);
  // Current proposal, normalized, written into `out`.
  void current(std::span<double> out) const;

 private:
  std::vector<double> weights_;
  std::vector<unsigned char> drawn_;
  double mass_ = 0.0;
};

// Preallocated drafting buffers for one tree configuration: B_i states
// for each depth, the output tree, and the sampling workspace. Reusing a
// plan across rounds performs no heap allocation.
class StateCachePlan {
 public:
  StateCachePlan(TreeConfig config, std::size_t state_dim, std::size_t vocab_size);

  const TreeConfig& config() const { return config_; }
  std::span<const std::size_t> batch_sizes() const { return batch_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t buffer_size(std::size_t depth) const { return states_[depth - 1].size(); }
  const DraftTree& tree() const { return tree_; }

 private:
  friend const DraftTree& draft_tree(const Model&, const DrafterState&, StateCachePlan&,
                                     RandomSource&, std::uint64_t);

  TreeConfig config_;
  std::size_t state_dim_;
  std::size_t vocab_size_;
  std::vector<std::size_t> batch_;
  std::vector<std::vector<DrafterState>> states_;
  DraftTree tree_;
  WithoutReplacement proposal_;
};

StateCachePlan build_cache_plan(const TreeConfig& config, std::size_t state_dim,
                                std::size_t vocab_size);

// Level-by-level batch drafting: each depth-(i-1) state is duplicated N_i
// times, N_i distinct tokens are drawn from its next-token distribution
// (stream {kDraft, round, i-1, position}), and every copy is stepped once.
// The tree lives in `plan` and is overwritten by the next call.
const DraftTree& draft_tree(const Model& drafter, const DrafterState& root_state,
                            StateCachePlan& plan, RandomSource& rng, std::uint64_t round);

// Sequential drafting with the same stream keys as a (1, ..., 1) tree.
DraftSequence draft_sequential(const Model& drafter, const DrafterState& root_state,
                               std::size_t gamma, RandomSource& rng, std::uint64_t round);

struct FlattenedTree {
  std::vector<std::vector<TokenId>> paths;            // B_γ root-to-leaf paths
  std::vector<std::vector<std::size_t>> node_index;   // [path][depth-1] -> tree node
  std::size_t distinct_positions = 0;                 // nodes the target must score
};

FlattenedTree flatten_for_scoring(const DraftTree& tree);

// Target distributions for a whole tree in one pass: row 0 follows the
// prefix, row node+1 follows prefix + path_to(node). Leaf rows are the tail
// distributions.
class TreeScores {
 public:
  TreeScores(std::size_t node_count, std::size_t vocab_size);

  std::size_t node_count() const { return node_count_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::span<const double> root() const { return {flat_.data(), vocab_size_}; }
  std::span<const double> after(std::size_t node) const {
    return {flat_.data() + (node + 1) * vocab_size_, vocab_size_};
  }
  std::span<double> mutable_row(std::size_t row) {
    return {flat_.data() + row * vocab_size_, vocab_size_};
  }

 private:
  std::size_t node_count_;
  std::size_t vocab_size_;
  std::vector<double> flat_;
};

TreeScores score_tree(const Model& target, const DrafterState& prefix_state, const DraftTree& tree);

// Greedy: follow the child matching the target argmax, else emit the argmax.
// Sampling: sibling-wise rejection without replacement; each rejection
// replaces p with residual(p, q) and removes the rejected token from q.
VerifyOutcome verify_tree(const TreeScores& scores, const DraftTree& tree, DecodeMode mode,
                          RandomSource& rng);

}  // namespace specdraft
