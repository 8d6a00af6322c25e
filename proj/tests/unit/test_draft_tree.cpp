#include <doctest.h>

#include <map>
#include <set>
#include <utility>

#include "alloc_counter.hpp"
#include "error_kind.hpp"
#include "exact_enumerator.hpp"
#include "fixtures.hpp"
#include "specdraft/draft_tree.hpp"
#include "specdraft/engine.hpp"
#include "specdraft/ssm_drafter.hpp"
#include "specdraft/tabular_model.hpp"

using namespace specdraft;
using specdraft::testing::enumerate_outcomes;
using specdraft::testing::error_kind_of;

namespace {

std::vector<std::size_t> sizes(std::initializer_list<std::size_t> s) { return s; }

}  // namespace

TEST_CASE("tree config parsing") {
  CHECK(TreeConfig::parse("3,2,2,1,1").widths().size() == 5);
  CHECK(TreeConfig::parse(" 3, 2 ,1").to_string() == "3,2,1");
  CHECK(TreeConfig::sequential(3) == TreeConfig::parse("1,1,1"));
  CHECK(TreeConfig::sequential(3).is_path());
  CHECK_FALSE(TreeConfig::parse("2,1").is_path());
  for (const char* bad : {"", "0", "3,0,1", "a", "3,,1", "-1"}) {
    CAPTURE(bad);
    CHECK(error_kind_of([&] { TreeConfig::parse(bad); }) == ErrorKind::kInvalidConfig);
  }
  const auto list = parse_config_list("3,3,2,1;3,2,2,1,1;2,2,2,1,1,1");
  REQUIRE(list.size() == 3);
  CHECK(list[2].gamma() == 6);
  CHECK(error_kind_of([] { parse_config_list("2,1;2,1"); }) == ErrorKind::kInvalidConfig);
}

TEST_CASE("batch sizes are cumulative products") {
  CHECK(batch_sizes(TreeConfig::parse("3,2,2,1,1")) == sizes({3, 6, 12, 12, 12}));
  CHECK(batch_sizes(TreeConfig::parse("1,1,1")) == sizes({1, 1, 1}));
  CHECK(batch_sizes(TreeConfig::parse("2,2,2,1,1,1")) == sizes({2, 4, 8, 8, 8, 8}));

  KeyedRandom rng(2);
  for (std::uint64_t t = 0; t < 200; ++t) {
    rng.select_stream({StreamPurpose::kPrompt, t, 0, 0});
    std::vector<std::size_t> w(1 + rng.next_u64() % 6);
    for (auto& x : w) x = 1 + rng.next_u64() % 4;
    const auto b = batch_sizes(TreeConfig(w));
    std::size_t product = 1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      product *= w[i];
      CHECK(b[i] == product);
    }
  }
}

TEST_CASE("cache plan buffers") {
  const StateCachePlan plan = build_cache_plan(TreeConfig::parse("3,2,2,1,1"), 16, 8);
  for (std::size_t d = 1; d <= 5; ++d) CHECK(plan.buffer_size(d) == plan.batch_sizes()[d - 1]);
  CHECK(plan.buffer_size(3) == 12);
  CHECK(error_kind_of([] { build_cache_plan(TreeConfig::parse("2"), 0, 8); }) ==
        ErrorKind::kInvalidArgument);
}

TEST_CASE("draft tree shape and sibling distinctness") {
  const auto pair = specdraft::testing::tabular_pair(5, 8, 2, 0.5, 0.3);
  const Model& drafter = *pair.drafter;
  KeyedRandom rng(1);
  for (const char* text : {"3,2,2,1,1", "2,2,2,1,1,1", "3,3,2,1", "8,1", "1,1,1"}) {
    CAPTURE(text);
    const TreeConfig config = TreeConfig::parse(text);
    StateCachePlan plan = build_cache_plan(config, drafter.state_dim(), 8);
    for (std::uint64_t round = 0; round < 20; ++round) {
      const DraftTree& tree = draft_tree(drafter, drafter.initial_state(), plan, rng, round);
      std::size_t total = 0;
      for (std::size_t b : batch_sizes(config)) total += b;
      REQUIRE(tree.node_count() == total);
      std::map<std::uint32_t, std::set<TokenId>> siblings;
      std::map<std::uint32_t, std::size_t> child_count;
      for (const TreeNode& n : tree.nodes()) {
        CHECK(siblings[n.parent].insert(n.token).second);
        ++child_count[n.parent];
        CHECK(n.q_prob > 0.0);
      }
      for (const auto& [parent, count] : child_count) {
        const std::size_t depth = parent == kRootParent ? 0 : tree.node(parent).depth;
        CHECK(count == config.width(depth + 1));
      }
      for (std::size_t i = 0; i < tree.node_count(); ++i) {
        // q_prob comes from the unrenormalized parent distribution.
        CHECK(tree.q_dist(i)[tree.node(i).token] == tree.node(i).q_prob);
      }
    }
  }
}

TEST_CASE("width larger than the vocabulary is a config error") {
  const TabularModel m(2, 1, {0.7, 0.3});
  KeyedRandom rng(0);
  StateCachePlan plan = build_cache_plan(TreeConfig::parse("3"), m.state_dim(), 2);
  CHECK(error_kind_of([&] { draft_tree(m, m.initial_state(), plan, rng, 0); }) ==
        ErrorKind::kInvalidConfig);
}

TEST_CASE("width equal to the vocabulary exhausts it") {
  const TabularModel m(2, 1, {0.7, 0.3});
  KeyedRandom rng(0);
  StateCachePlan plan = build_cache_plan(TreeConfig::parse("2,1"), m.state_dim(), 2);
  for (std::uint64_t round = 0; round < 10; ++round) {
    const DraftTree& tree = draft_tree(m, m.initial_state(), plan, rng, round);
    std::set<TokenId> level1{tree.node(0).token, tree.node(1).token};
    CHECK(level1 == std::set<TokenId>{0, 1});
  }
}

TEST_CASE("zero-mass siblings fall back to uniform over the rest") {
  const TabularModel m(4, 1, {1.0, 0.0, 0.0, 0.0});
  KeyedRandom rng(0);
  StateCachePlan plan = build_cache_plan(TreeConfig::parse("3"), m.state_dim(), 4);
  const DraftTree& tree = draft_tree(m, m.initial_state(), plan, rng, 0);
  CHECK(tree.node(0).token == 0);
  CHECK(tree.node(1).token != 0);
  CHECK(tree.node(1).q_prob == 0.0);
}

TEST_CASE("path tree equals sequential drafting on the same streams") {
  const SsmDrafter m = SsmDrafter::generate(12, 8, {3});
  const DrafterState root = drafter_init(m, std::vector<TokenId>{1, 2, 3});
  StateCachePlan plan = build_cache_plan(TreeConfig::sequential(4), m.state_dim(), 12);
  for (std::uint64_t round = 0; round < 50; ++round) {
    KeyedRandom a(9);
    KeyedRandom b(9);
    const DraftSequence seq = draft_sequential(m, root, 4, a, round);
    const DraftSequence from_tree = draft_tree(m, root, plan, b, round).as_sequence();
    CHECK(seq.tokens == from_tree.tokens);
    CHECK(seq.q_probs == from_tree.q_probs);
    CHECK(seq.q_dists == from_tree.q_dists);
  }
}

TEST_CASE("flattening counts each distinct node once") {
  const auto pair = specdraft::testing::tabular_pair(8, 8, 2, 0.5, 0.3);
  KeyedRandom rng(3);
  StateCachePlan plan = build_cache_plan(TreeConfig::parse("3,2,2,1,1"), pair.drafter->state_dim(), 8);
  const DraftTree& tree = draft_tree(*pair.drafter, pair.drafter->initial_state(), plan, rng, 0);
  const FlattenedTree flat = flatten_for_scoring(tree);
  CHECK(flat.paths.size() == 12);
  for (const auto& p : flat.paths) CHECK(p.size() == 5);
  CHECK(flat.distinct_positions == 45);

  // Oracle: deduplicate (parent chain, token) prefixes directly from the paths.
  std::set<std::vector<TokenId>> prefixes;
  for (const auto& p : flat.paths) {
    for (std::size_t d = 1; d <= p.size(); ++d) prefixes.emplace(p.begin(), p.begin() + d);
  }
  CHECK(prefixes.size() == 45);
  for (std::size_t i = 0; i < flat.paths.size(); ++i) {
    for (std::size_t d = 0; d < 5; ++d) {
      CHECK(tree.path_to(flat.node_index[i][d]) ==
            std::vector<TokenId>(flat.paths[i].begin(), flat.paths[i].begin() + d + 1));
    }
  }

  StateCachePlan plan21 = build_cache_plan(TreeConfig::parse("2,1"), pair.drafter->state_dim(), 8);
  const FlattenedTree flat21 =
      flatten_for_scoring(draft_tree(*pair.drafter, pair.drafter->initial_state(), plan21, rng, 0));
  CHECK(flat21.paths.size() == 2);
  CHECK(flat21.paths[0][0] != flat21.paths[1][0]);
  CHECK(flat21.distinct_positions == 4);
}

TEST_CASE("tree scores match per-path target scoring") {
  const auto pair = specdraft::testing::tabular_pair(12, 6, 3, 0.5, 0.3);
  const std::vector<TokenId> prefix{2, 5};
  const DrafterState target_state = drafter_init(*pair.target, prefix);
  KeyedRandom rng(1);
  StateCachePlan plan = build_cache_plan(TreeConfig::parse("3,2,1"), pair.drafter->state_dim(), 6);
  const DraftTree& tree = draft_tree(*pair.drafter, drafter_init(*pair.drafter, prefix), plan, rng, 4);
  const TreeScores scores = score_tree(*pair.target, target_state, tree);
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    const auto path = tree.path_to(i);
    const auto expect = target_score_parallel(*pair.target, prefix, path);
    const auto after = scores.after(i);
    CHECK(std::equal(after.begin(), after.end(), expect.back().probs().begin()));
  }
}

TEST_CASE("greedy tree verification") {
  // Target: unigram with argmax 2 everywhere.
  const TabularModel target(3, 1, {0.2, 0.3, 0.5});
  const TabularModel drafter(3, 1, {0.5, 0.4, 0.1});
  StateCachePlan plan = build_cache_plan(TreeConfig::parse("2,1"), 1, 3);
  KeyedRandom rng(0);
  bool saw_miss = false;
  for (std::uint64_t round = 0; round < 40; ++round) {
    const DraftTree& tree = draft_tree(drafter, drafter.initial_state(), plan, rng, round);
    const TreeScores scores = score_tree(target, target.initial_state(), tree);
    const VerifyOutcome out = verify_tree(scores, tree, DecodeMode::kGreedy, rng);
    const bool has_two = tree.node(0).token == 2 || tree.node(1).token == 2;
    if (!has_two) {
      saw_miss = true;
      CHECK(out.committed == std::vector<TokenId>{2});
      CHECK(out.n_accepted_drafts == 0);
    } else {
      CHECK(out.committed.front() == 2);
    }
  }
  CHECK(saw_miss);
}

TEST_CASE("sampling tree verification, first token distributed as p") {
  // vocab 2, config (2,1): all (sibling order, accept, residual) outcomes.
  const TabularModel target(2, 2, {0.35, 0.65, 0.8, 0.2, 0.45, 0.55});
  const TabularModel drafter(2, 2, {0.7, 0.3, 0.1, 0.9, 0.6, 0.4});
  const std::vector<TokenId> prompt{1};
  const auto out = enumerate_outcomes([&](RandomSource& rng) {
    Decoder d(target, drafter, prompt, DecodeMode::kSampling);
    return d.round_tree(TreeConfig::parse("2,1"), rng, 0).committed.front();
  });
  CHECK(out.at(0) == doctest::Approx(0.45).epsilon(1e-12));
  CHECK(out.at(1) == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("sampling tree verification is lossless on small instances") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto pair = specdraft::testing::tabular_pair(seed, 3, 2, 0.7, 0.5);
    const std::vector<TokenId> prompt{static_cast<TokenId>(seed % 3)};
    for (const char* text : {"2,1", "2,2", "1,2"}) {
      CAPTURE(seed);
      CAPTURE(text);
      const TreeConfig config = TreeConfig::parse(text);
      const auto sd = specdraft::testing::speculative_distribution(
          *pair.target, *pair.drafter, prompt, 2, DecodeMode::kSampling,
          [&](Decoder& d, RandomSource& rng) { return d.round_tree(config, rng, 0); });
      const auto ar = specdraft::testing::autoregressive_distribution(*pair.target, prompt, 2);
      CHECK(specdraft::testing::total_variation(sd, ar) < 1e-9);
    }
  }
}

TEST_CASE("path tree and sequential drafting commit the same count distribution") {
  const auto pair = specdraft::testing::tabular_pair(21, 4, 2, 0.6, 0.4);
  const std::vector<TokenId> prompt{3};
  auto lengths = [&](auto round_fn) {
    return enumerate_outcomes([&](RandomSource& rng) {
      Decoder d(*pair.target, *pair.drafter, prompt, DecodeMode::kSampling);
      return round_fn(d, rng).committed.size();
    });
  };
  const auto tree = lengths([](Decoder& d, RandomSource& rng) {
    return d.round_tree(TreeConfig::sequential(3), rng, 0);
  });
  const auto seq = lengths([](Decoder& d, RandomSource& rng) { return d.round_sequential(3, rng, 0); });
  CHECK(specdraft::testing::total_variation(tree, seq) < 1e-12);
}

TEST_CASE("drafting with a reused plan does not allocate") {
  const SsmDrafter m = SsmDrafter::generate(32, 16, {2});
  const DrafterState root = drafter_init(m, std::vector<TokenId>{4, 5});
  KeyedRandom rng(6);
  StateCachePlan a = build_cache_plan(TreeConfig::parse("3,2,2,1,1"), 16, 32);
  StateCachePlan b = build_cache_plan(TreeConfig::parse("2,2,2,1,1,1"), 16, 32);
  draft_tree(m, root, a, rng, 0);
  draft_tree(m, root, b, rng, 0);
  const std::size_t before = specdraft::testing::allocation_count();
  for (std::uint64_t round = 1; round < 100; ++round) {
    draft_tree(m, root, round % 2 ? a : b, rng, round);
  }
  CHECK(specdraft::testing::allocation_count() == before);
}
