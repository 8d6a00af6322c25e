#include <doctest.h>

#include <cmath>
#include <vector>

#include "error_kind.hpp"
#include "specdraft/model.hpp"
#include "specdraft/random.hpp"
#include "specdraft/ssm_drafter.hpp"
#include "specdraft/tabular_model.hpp"

using namespace specdraft;
using specdraft::testing::error_kind_of;

namespace {

std::vector<TokenId> random_tokens(std::uint64_t seed, std::size_t n, std::size_t vocab) {
  KeyedRandom rng(seed);
  rng.select_stream({StreamPurpose::kPrompt, 0, 0, 0});
  std::vector<TokenId> out(n);
  for (TokenId& t : out) t = static_cast<TokenId>(rng.next_u64() % vocab);
  return out;
}

// One token at a time from a fresh init: the slow way to score.
std::vector<Distribution> naive_scores(const Model& m, std::vector<TokenId> prefix,
                                       const std::vector<TokenId>& candidates) {
  std::vector<Distribution> out;
  out.push_back(next_distribution(m, drafter_init(m, prefix)));
  for (TokenId c : candidates) {
    prefix.push_back(c);
    out.push_back(next_distribution(m, drafter_init(m, prefix)));
  }
  return out;
}

}  // namespace

TEST_CASE("unigram model scores identical copies") {
  const TabularModel m(3, 1, {0.2, 0.3, 0.5});
  const std::vector<TokenId> prefix{0, 2, 1};
  const std::vector<TokenId> cands{1, 1};
  const auto scores = target_score_parallel(m, prefix, cands);
  REQUIRE(scores.size() == 3);
  for (const Distribution& d : scores) {
    CHECK(d[0] == doctest::Approx(0.2));
    CHECK(d[2] == doctest::Approx(0.5));
  }
}

TEST_CASE("bigram lookup") {
  // Contexts: BOS, A, B.
  const TabularModel m(2, 2, {0.5, 0.5, 0.7, 0.3, 0.1, 0.9});
  const std::vector<TokenId> prefix{0};
  const auto scores = target_score_parallel(m, prefix, {});
  REQUIRE(scores.size() == 1);
  CHECK(scores[0][0] == doctest::Approx(0.7));
  CHECK(scores[0][1] == doctest::Approx(0.3));
  CHECK(m.row_for(std::vector<TokenId>{})[0] == doctest::Approx(0.5));
}

TEST_CASE("trigram context indexing uses the last two tokens, oldest first") {
  const std::size_t v = 3;
  std::vector<double> rows;
  for (std::size_t c = 0; c < 16; ++c) {
    std::vector<double> r(v, 0.0);
    r[c % v] = 1.0;
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const TabularModel m(v, 3, rows);
  CHECK(m.context_count() == 16);
  CHECK(m.context_index(std::vector<TokenId>{}) == 0);
  CHECK(m.context_index(std::vector<TokenId>{2}) == 3);             // (BOS, 2)
  CHECK(m.context_index(std::vector<TokenId>{0, 1, 2}) == 2 * 4 + 3);  // (1, 2)
  const DrafterState s = drafter_init(m, std::vector<TokenId>{0, 1, 2});
  std::vector<double> p(v);
  m.predict(s, p);
  CHECK(p[11 % v] == 1.0);
}

TEST_CASE("parallel scoring matches the one-token-at-a-time oracle") {
  const TabularModel m = TabularModel::generate(6, 2, {99, 0.5, std::nullopt});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto prefix = random_tokens(seed, 5, 6);
    const auto cands = random_tokens(seed + 100, 3, 6);
    const auto fast = target_score_parallel(m, prefix, cands);
    const auto slow = naive_scores(m, prefix, cands);
    REQUIRE(fast.size() == 4);
    CHECK(fast == slow);
  }
  const SsmDrafter s = SsmDrafter::generate(6, 8, {4});
  const auto prefix = random_tokens(7, 9, 6);
  const auto cands = random_tokens(8, 4, 6);
  CHECK(target_score_parallel(s, prefix, cands) == naive_scores(s, prefix, cands));
}

TEST_CASE("invalid tokens are rejected") {
  const TabularModel m(2, 2, {0.5, 0.5, 0.7, 0.3, 0.1, 0.9});
  const std::vector<TokenId> bad{0, 2};
  CHECK(error_kind_of([&] { drafter_init(m, bad); }) == ErrorKind::kInvalidInput);
  CHECK(error_kind_of([&] { target_score_parallel(m, std::vector<TokenId>{0}, bad); }) ==
        ErrorKind::kInvalidInput);
  CHECK(error_kind_of([&] { drafter_step(m, m.initial_state(), 5); }) == ErrorKind::kInvalidInput);
}

TEST_CASE("rows are validated at construction") {
  CHECK(error_kind_of([] { TabularModel(2, 1, {0.5, 0.3}); }) == ErrorKind::kInvariantViolation);
  CHECK(error_kind_of([] { TabularModel(2, 1, {1.2, -0.2}); }) == ErrorKind::kInvariantViolation);
  CHECK(error_kind_of([] { TabularModel(2, 2, {0.5, 0.5}); }) == ErrorKind::kInvariantViolation);
  CHECK_NOTHROW(TabularModel(2, 1, {0.5, 0.5 + 5e-7}));
}

TEST_CASE("temperature sharpens rows") {
  const TabularModel hot(2, 1, {0.8, 0.2}, 0.5);
  // p^2 normalized: 0.64 / 0.68.
  CHECK(hot.rows()[0] == doctest::Approx(0.64 / 0.68));
  const TabularModel cold(2, 1, {0.8, 0.2}, 1.0);
  CHECK(cold.rows()[0] == doctest::Approx(0.8));
}

TEST_CASE("generated rows are valid distributions and reproducible") {
  const TabularGenerator gen{42, 0.3, RowPerturbation{43, 1.0, 0.25}};
  const TabularModel a = TabularModel::generate(8, 2, gen);
  const TabularModel b = TabularModel::generate(8, 2, gen);
  CHECK(std::equal(a.rows().begin(), a.rows().end(), b.rows().begin(), b.rows().end()));
  for (std::size_t c = 0; c < a.context_count(); ++c) {
    double sum = 0.0;
    for (double p : a.row(c)) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
  const TabularModel other = TabularModel::generate(8, 2, {42, 0.3, std::nullopt});
  CHECK_FALSE(std::equal(a.rows().begin(), a.rows().end(), other.rows().begin()));
}

TEST_CASE("drafter_init is the fold of drafter_step") {
  const SsmDrafter ssm = SsmDrafter::generate(10, 16, {1});
  const TabularModel tab = TabularModel::generate(10, 3, {2, 1.0, std::nullopt});
  const auto prefix = random_tokens(3, 40, 10);
  for (const Model* m : {static_cast<const Model*>(&ssm), static_cast<const Model*>(&tab)}) {
    DrafterState s = drafter_init(*m, {});
    CHECK(s.position == 0);
    CHECK(s == m->initial_state());
    for (TokenId t : prefix) s = drafter_step(*m, s, t).state;
    CHECK(s == drafter_init(*m, prefix));
    CHECK(s.position == prefix.size());
  }
}

TEST_CASE("drafter_step has value semantics") {
  const SsmDrafter m = SsmDrafter::generate(10, 16, {1});
  const DrafterState s = drafter_init(m, random_tokens(1, 12, 10));
  const DrafterState before = s;
  const StepResult r1 = drafter_step(m, s, 4);
  const StepResult r2 = drafter_step(m, s, 4);
  CHECK(s == before);
  CHECK(r1.state == r2.state);
  CHECK(r1.next == r2.next);
  CHECK(r1.state.position == s.position + 1);
}

TEST_CASE("duplicate_state makes isolated copies") {
  const SsmDrafter m = SsmDrafter::generate(10, 16, {1});
  const DrafterState s = drafter_init(m, random_tokens(2, 12, 10));
  CHECK(error_kind_of([&] { duplicate_state(s, 0); }) == ErrorKind::kInvalidArgument);
  const auto one = duplicate_state(s, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == s);
  auto three = duplicate_state(s, 3);
  m.advance(three[0], 3);
  CHECK(three[1] == s);
  CHECK(three[2] == s);
  CHECK_FALSE(three[0] == s);
}

TEST_CASE("state size does not depend on position") {
  const SsmDrafter m = SsmDrafter::generate(32, 24, {5});
  const std::size_t bytes0 = m.initial_state().payload_bytes();
  for (std::size_t len : {1u, 128u, 8192u}) {
    const DrafterState s = drafter_init(m, random_tokens(len, len, 32));
    CHECK(s.payload_bytes() == bytes0);
    // Duplication copies the payload and nothing else.
    CHECK(duplicate_state(s, 2)[1].payload.size() == m.state_dim());
  }
  const TabularModel t = TabularModel::generate(5, 4, {1, 1.0, std::nullopt});
  CHECK(drafter_init(t, random_tokens(1, 8192, 5)).payload_bytes() ==
        t.initial_state().payload_bytes());
}

TEST_CASE("memoryless ssm matches a per-token lookup oracle") {
  SsmParameters p = SsmDrafter::generate(7, 5, {11}).parameters();
  std::fill(p.decay.begin(), p.decay.end(), 0.0);
  const SsmDrafter m(p);

  // Oracle built straight from the parameters: h = sigmoid(g[x]) * e[x],
  // logits = W h, softmax.
  auto oracle = [&](TokenId x) {
    std::vector<double> h(p.state_dim);
    for (std::size_t i = 0; i < p.state_dim; ++i) {
      const double g = p.gate[x * p.state_dim + i];
      h[i] = p.embedding[x * p.state_dim + i] / (1.0 + std::exp(-g));
    }
    std::vector<double> logits(p.vocab_size);
    double mx = -1e300;
    for (std::size_t v = 0; v < p.vocab_size; ++v) {
      for (std::size_t i = 0; i < p.state_dim; ++i) logits[v] += p.output[v * p.state_dim + i] * h[i];
      mx = std::max(mx, logits[v]);
    }
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (double& l : logits) l /= z;
    return logits;
  };

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto prefix = random_tokens(seed, 1 + seed * 3, 7);
    const Distribution d = next_distribution(m, drafter_init(m, prefix));
    const auto expect = oracle(prefix.back());
    for (std::size_t v = 0; v < 7; ++v) CHECK(d[v] == doctest::Approx(expect[v]).epsilon(1e-12));
  }
}

TEST_CASE("ssm parameters are validated") {
  SsmParameters p = SsmDrafter::generate(4, 3, {1}).parameters();
  p.decay[0] = 1.0;
  CHECK(error_kind_of([&] { SsmDrafter{p}; }) == ErrorKind::kInvariantViolation);
  p.decay[0] = 0.5;
  p.output.pop_back();
  CHECK(error_kind_of([&] { SsmDrafter{p}; }) == ErrorKind::kInvariantViolation);
  CHECK(error_kind_of([] { SsmDrafter::generate(4, 0, {1}); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("generated ssm decays lie in (0, 1)") {
  const SsmDrafter m = SsmDrafter::generate(16, 64, {9});
  for (double a : m.parameters().decay) {
    CHECK(a > 0.0);
    CHECK(a < 1.0);
  }
  CHECK(SsmDrafter::generate(16, 64, {9}).parameters() == m.parameters());
}
