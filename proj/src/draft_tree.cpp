#include "specdraft/draft_tree.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <string>

#include "specdraft/error.hpp"

namespace specdraft {

// ---------------------------------------------------------------------------
// TreeConfig

TreeConfig::TreeConfig(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.empty()) fail(ErrorKind::kInvalidConfig, "tree config needs at least one depth");
  for (std::size_t w : widths_) {
    if (w == 0) fail(ErrorKind::kInvalidConfig, "tree widths must be at least 1");
  }
}

TreeConfig TreeConfig::parse(std::string_view text) {
  std::vector<std::size_t> widths;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    std::string_view item = text.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      fail(ErrorKind::kInvalidConfig, "bad tree config '" + std::string(text) + "'");
    }
    widths.push_back(value);
    start = comma + 1;
  }
  return TreeConfig(std::move(widths));
}

TreeConfig TreeConfig::sequential(std::size_t gamma) {
  if (gamma == 0) fail(ErrorKind::kInvalidConfig, "draft length must be at least 1");
  return TreeConfig(std::vector<std::size_t>(gamma, 1));
}

bool TreeConfig::is_path() const {
  return std::all_of(widths_.begin(), widths_.end(), [](std::size_t w) { return w == 1; });
}

std::string TreeConfig::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(widths_[i]);
  }
  return out;
}

std::vector<TreeConfig> parse_config_list(std::string_view text) {
  std::vector<TreeConfig> configs;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t semi = std::min(text.find(';', start), text.size());
    configs.push_back(TreeConfig::parse(text.substr(start, semi - start)));
    start = semi + 1;
  }
  std::set<TreeConfig> seen(configs.begin(), configs.end());
  if (seen.size() != configs.size()) fail(ErrorKind::kInvalidConfig, "duplicate tree configs");
  return configs;
}

std::vector<std::size_t> batch_sizes(const TreeConfig& config) {
  std::vector<std::size_t> out;
  out.reserve(config.gamma());
  std::size_t product = 1;
  for (std::size_t w : config.widths()) {
    product *= w;
    out.push_back(product);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DraftTree

DraftTree::DraftTree(TreeConfig config, std::size_t vocab_size)
    : config_(std::move(config)), vocab_size_(vocab_size), batch_(batch_sizes(config_)) {
  std::size_t total = 0;
  for (std::size_t b : batch_) {
    level_begin_.push_back(total);
    total += b;
  }
  nodes_.resize(total);
  next_.assign((total + 1) * vocab_size_, 0.0);
}

std::size_t DraftTree::first_child(std::size_t node) const {
  const std::size_t depth = nodes_[node].depth;
  if (depth >= config_.gamma()) fail(ErrorKind::kInvalidInput, "leaf has no children");
  const std::size_t position = node - level_begin(depth);
  return level_begin(depth + 1) + position * config_.width(depth + 1);
}

std::span<const double> DraftTree::q_dist(std::size_t node) const {
  const std::uint32_t parent = nodes_[node].parent;
  return parent == kRootParent ? root_next() : next_after(parent);
}

std::vector<TokenId> DraftTree::path_to(std::size_t node) const {
  std::vector<TokenId> path(nodes_[node].depth);
  std::uint32_t cursor = static_cast<std::uint32_t>(node);
  for (std::size_t i = path.size(); i-- > 0;) {
    path[i] = nodes_[cursor].token;
    cursor = nodes_[cursor].parent;
  }
  return path;
}

DraftSequence DraftTree::as_sequence() const {
  if (!config_.is_path()) fail(ErrorKind::kInvalidInput, "as_sequence needs a path tree");
  DraftSequence seq;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    seq.tokens.push_back(nodes_[i].token);
    seq.q_probs.push_back(nodes_[i].q_prob);
    const auto q = q_dist(i);
    seq.q_dists.push_back(Distribution::normalized({q.begin(), q.end()}));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// WithoutReplacement

WithoutReplacement::WithoutReplacement(std::size_t vocab_size)
    : weights_(vocab_size, 0.0), drawn_(vocab_size, 0) {}

void WithoutReplacement::reset(std::span<const double> q) {
  if (q.size() != weights_.size()) fail(ErrorKind::kInvalidInput, "proposal size mismatch");
  std::copy(q.begin(), q.end(), weights_.begin());
  std::fill(drawn_.begin(), drawn_.end(), 0);
  mass_ = 0.0;
  for (double w : weights_) mass_ += w;
}

double WithoutReplacement::probability(TokenId token) const { return weights_[token] / mass_; }

std::size_t WithoutReplacement::draw(RandomSource& rng) const { return rng.categorical(weights_); }

void WithoutReplacement::remove(TokenId token) {
  drawn_[token] = 1;
  weights_[token] = 0.0;
  mass_ = 0.0;
  for (double w : weights_) mass_ += w;
  if (mass_ > 0.0) return;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] = drawn_[i] ? 0.0 : 1.0;
    mass_ += weights_[i];
  }
}

void WithoutReplacement::current(std::span<double> out) const {
  for (std::size_t i = 0; i < weights_.size(); ++i) out[i] = weights_[i] / mass_;
}

// ---------------------------------------------------------------------------
// StateCachePlan / drafting

StateCachePlan::StateCachePlan(TreeConfig config, std::size_t state_dim, std::size_t vocab_size)
    : config_(std::move(config)),
      state_dim_(state_dim),
      vocab_size_(vocab_size),
      batch_(specdraft::batch_sizes(config_)),
      tree_(config_, vocab_size),
      proposal_(vocab_size) {
  if (state_dim == 0) fail(ErrorKind::kInvalidArgument, "state_dim must be positive");
  if (vocab_size == 0) fail(ErrorKind::kInvalidArgument, "vocab_size must be positive");
  states_.reserve(batch_.size());
  for (std::size_t b : batch_) {
    states_.emplace_back(b, DrafterState{std::vector<double>(state_dim, 0.0), 0});
  }
}

StateCachePlan build_cache_plan(const TreeConfig& config, std::size_t state_dim,
                                std::size_t vocab_size) {
  return StateCachePlan(config, state_dim, vocab_size);
}

const DraftTree& draft_tree(const Model& drafter, const DrafterState& root_state,
                            StateCachePlan& plan, RandomSource& rng, std::uint64_t round) {
  const TreeConfig& config = plan.config_;
  const std::size_t vocab = drafter.vocab_size();
  if (plan.state_dim_ != drafter.state_dim() || plan.vocab_size_ != vocab ||
      root_state.payload.size() != drafter.state_dim()) {
    fail(ErrorKind::kInvalidInput, "cache plan does not match the drafter");
  }
  for (std::size_t w : config.widths()) {
    if (w > vocab) {
      fail(ErrorKind::kInvalidConfig, "tree width " + std::to_string(w) +
                                          " exceeds vocabulary size " + std::to_string(vocab));
    }
  }

  DraftTree& tree = plan.tree_;
  drafter.predict(root_state, {tree.next_.data(), vocab});

  for (std::size_t depth = 1; depth <= config.gamma(); ++depth) {
    const std::size_t width = config.width(depth);
    const std::size_t parents = depth == 1 ? 1 : plan.batch_[depth - 2];
    const std::size_t child_base = tree.level_begin(depth);
    std::vector<DrafterState>& level = plan.states_[depth - 1];
    for (std::size_t k = 0; k < parents; ++k) {
      const bool at_root = depth == 1;
      const std::size_t parent_node = at_root ? 0 : tree.level_begin(depth - 1) + k;
      const DrafterState& parent_state = at_root ? root_state : plan.states_[depth - 2][k];
      const std::span<const double> parent_next =
          at_root ? tree.root_next() : tree.next_after(parent_node);

      rng.select_stream({StreamPurpose::kDraft, round, static_cast<std::uint32_t>(depth - 1),
                         static_cast<std::uint32_t>(k)});
      plan.proposal_.reset(parent_next);
      for (std::size_t j = 0; j < width; ++j) {
        const auto token = static_cast<TokenId>(plan.proposal_.draw(rng));
        plan.proposal_.remove(token);
        const std::size_t position = k * width + j;
        const std::size_t node = child_base + position;
        tree.nodes_[node] = TreeNode{
            token, parent_next[token],
            at_root ? kRootParent : static_cast<std::uint32_t>(parent_node),
            static_cast<std::uint32_t>(depth)};
        DrafterState& state = level[position];
        copy_state(parent_state, state);
        drafter.advance(state, token);
        drafter.predict(state, {tree.next_.data() + (node + 1) * vocab, vocab});
      }
    }
  }
  return tree;
}

DraftSequence draft_sequential(const Model& drafter, const DrafterState& root_state,
                               std::size_t gamma, RandomSource& rng, std::uint64_t round) {
  if (gamma == 0) fail(ErrorKind::kInvalidConfig, "draft length must be at least 1");
  const std::size_t vocab = drafter.vocab_size();
  DraftSequence seq;
  seq.tokens.reserve(gamma);
  seq.q_probs.reserve(gamma);
  seq.q_dists.reserve(gamma);
  DrafterState state = root_state;
  std::vector<double> probs(vocab);
  drafter.predict(state, probs);
  for (std::size_t depth = 1; depth <= gamma; ++depth) {
    rng.select_stream({StreamPurpose::kDraft, round, static_cast<std::uint32_t>(depth - 1), 0});
    const auto token = static_cast<TokenId>(rng.categorical(probs));
    seq.tokens.push_back(token);
    seq.q_probs.push_back(probs[token]);
    seq.q_dists.push_back(Distribution::normalized(probs));
    drafter.advance(state, token);
    drafter.predict(state, probs);
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Scoring

FlattenedTree flatten_for_scoring(const DraftTree& tree) {
  FlattenedTree flat;
  const std::size_t gamma = tree.config().gamma();
  const std::size_t leaves = tree.level_size(gamma);
  std::vector<unsigned char> seen(tree.node_count(), 0);
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    std::vector<std::size_t> chain(gamma);
    std::uint32_t cursor = static_cast<std::uint32_t>(tree.level_begin(gamma) + leaf);
    for (std::size_t i = gamma; i-- > 0;) {
      chain[i] = cursor;
      cursor = tree.node(cursor).parent;
    }
    std::vector<TokenId> path(gamma);
    for (std::size_t i = 0; i < gamma; ++i) {
      path[i] = tree.node(chain[i]).token;
      if (!seen[chain[i]]) {
        seen[chain[i]] = 1;
        ++flat.distinct_positions;
      }
    }
    flat.paths.push_back(std::move(path));
    flat.node_index.push_back(std::move(chain));
  }
  return flat;
}

TreeScores::TreeScores(std::size_t node_count, std::size_t vocab_size)
    : node_count_(node_count), vocab_size_(vocab_size), flat_((node_count + 1) * vocab_size, 0.0) {}

TreeScores score_tree(const Model& target, const DrafterState& prefix_state,
                      const DraftTree& tree) {
  if (target.vocab_size() != tree.vocab_size()) {
    fail(ErrorKind::kInvalidInput, "target and drafter vocabularies differ");
  }
  TreeScores scores(tree.node_count(), tree.vocab_size());
  target.predict(prefix_state, scores.mutable_row(0));
  std::vector<DrafterState> previous(1, prefix_state);
  std::vector<DrafterState> current;
  const TreeConfig& config = tree.config();
  for (std::size_t depth = 1; depth <= config.gamma(); ++depth) {
    const std::size_t begin = tree.level_begin(depth);
    const std::size_t width = config.width(depth);
    current.assign(tree.level_size(depth), DrafterState{});
    for (std::size_t pos = 0; pos < current.size(); ++pos) {
      current[pos] = previous[pos / width];
      target.advance(current[pos], tree.node(begin + pos).token);
      target.predict(current[pos], scores.mutable_row(begin + pos + 1));
    }
    std::swap(previous, current);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Tree verification

VerifyOutcome verify_tree(const TreeScores& scores, const DraftTree& tree, DecodeMode mode,
                          RandomSource& rng) {
  if (scores.node_count() != tree.node_count() || scores.vocab_size() != tree.vocab_size()) {
    fail(ErrorKind::kInvalidInput, "tree scores do not cover every draft node");
  }
  const TreeConfig& config = tree.config();
  const std::size_t gamma = config.gamma();
  const std::size_t vocab = tree.vocab_size();

  VerifyOutcome out;
  out.committed.reserve(gamma + 1);

  std::vector<double> p;
  std::vector<double> q_current;
  WithoutReplacement proposal(vocab);
  if (mode == DecodeMode::kSampling) {
    p.resize(vocab);
    q_current.resize(vocab);
  }

  // `node` is the last accepted node; kRootParent stands for the root.
  std::uint32_t node = kRootParent;
  for (std::size_t depth = 1; depth <= gamma; ++depth) {
    const std::span<const double> target =
        node == kRootParent ? scores.root() : scores.after(node);
    const std::span<const double> drafter =
        node == kRootParent ? tree.root_next() : tree.next_after(node);
    const std::size_t first = node == kRootParent ? 0 : tree.first_child(node);
    const std::size_t width = config.width(depth);

    std::size_t accepted = width;
    if (mode == DecodeMode::kGreedy) {
      const TokenId best = argmax(target);
      for (std::size_t j = 0; j < width; ++j) {
        if (tree.node(first + j).token == best) {
          accepted = j;
          break;
        }
      }
      if (accepted == width) {
        out.committed.push_back(best);
        return out;
      }
    } else {
      std::copy(target.begin(), target.end(), p.begin());
      proposal.reset(drafter);
      for (std::size_t j = 0; j < width; ++j) {
        const TokenId token = tree.node(first + j).token;
        if (rng.bernoulli(acceptance_probability(p[token], proposal.probability(token)))) {
          accepted = j;
          break;
        }
        proposal.current(q_current);
        apply_residual(p, q_current);
        proposal.remove(token);
      }
      if (accepted == width) {
        out.committed.push_back(static_cast<TokenId>(rng.categorical(p)));
        return out;
      }
    }
    node = static_cast<std::uint32_t>(first + accepted);
    out.committed.push_back(tree.node(node).token);
    ++out.n_accepted_drafts;
  }

  const std::span<const double> tail = scores.after(node);
  out.committed.push_back(mode == DecodeMode::kGreedy ? argmax(tail)
                                                      : static_cast<TokenId>(rng.categorical(tail)));
  out.used_bonus = true;
  return out;
}

}  // namespace specdraft
