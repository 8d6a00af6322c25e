#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace specdraft {

enum class StreamPurpose : std::uint32_t {
  kDraft = 1,
  kVerify = 2,
  kPrompt = 3,
  kTargetOnly = 4,
};

// Names one independent random stream inside a generation run. Draft
// streams are keyed by the tree node being expanded (depth 0 is the root),
// so results do not depend on the order nodes are visited in.
struct StreamKey {
  StreamPurpose purpose = StreamPurpose::kDraft;
  std::uint64_t round = 0;
  std::uint32_t depth = 0;
  std::uint32_t index = 0;
};

// Every random decision made by drafting and verification goes through one
// of the two primitives below. Concrete streams implement them with a single
// uniform variate each; the test-suite's exact enumerator implements them by
// branching over every outcome with its probability.
class RandomSource {
 public:
  virtual ~RandomSource() = default;

  virtual void select_stream(const StreamKey& key) = 0;

  // True with probability `p` (clamped to [0, 1]).
  virtual bool bernoulli(double p) = 0;

  // Index i with probability weights[i] / sum(weights). Weights must be
  // non-negative with a positive sum.
  virtual std::size_t categorical(std::span<const double> weights) = 0;
};

std::uint64_t mix64(std::uint64_t x);

// Splittable seed derivation: folds each key into `base` through mix64.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

// Inverse-CDF lookup of `u` in [0, 1) over unnormalized weights. Never
// returns an index whose weight is zero.
std::size_t sample_index(std::span<const double> weights, double u);

// SplitMix64 streams reseeded from (run seed, StreamKey) on every
// select_stream call. Cheap to reseed, so one object serves a whole run.
class KeyedRandom final : public RandomSource {
 public:
  explicit KeyedRandom(std::uint64_t seed);

  void select_stream(const StreamKey& key) override;
  bool bernoulli(double p) override;
  std::size_t categorical(std::span<const double> weights) override;

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  std::uint64_t next_u64();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// Generator used for model construction. The engine is std::mt19937_64,
// whose output sequence is fixed by the standard; the variate transforms
// are spelled out here (instead of std::*_distribution, whose algorithms are
// implementation-defined) so generated models are identical everywhere.
class GeneratorRng {
 public:
  explicit GeneratorRng(std::uint64_t seed) : engine_(seed) {}

  // (x >> 11) * 2^-53, in [0, 1).
  double uniform();
  // Box-Muller with the cosine branch only; one normal per two uniforms.
  double normal();
  // Marsaglia-Tsang; shape < 1 uses the Gamma(shape + 1) * U^(1/shape) boost.
  double gamma(double shape);

 private:
  std::mt19937_64 engine_;
};

}  // namespace specdraft
