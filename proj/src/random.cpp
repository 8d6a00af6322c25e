#include "specdraft/random.hpp"

#include <cmath>
#include <numbers>

#include "specdraft/error.hpp"

namespace specdraft {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  std::uint64_t lane = 1;
  for (std::uint64_t k : keys) {
    h = mix64(h ^ mix64(k + lane * kGolden));
    ++lane;
  }
  return h;
}

std::size_t sample_index(std::span<const double> weights, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) fail(ErrorKind::kInvalidInput, "categorical weights sum to zero");
  const double target = u * total;
  double cumulative = 0.0;
  std::size_t last_positive = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    last_positive = i;
    if (target < cumulative) return i;
  }
  // Rounding left u*total at or past the final cumulative sum.
  return last_positive;
}

KeyedRandom::KeyedRandom(std::uint64_t seed) : seed_(seed), state_(mix64(seed)) {}

void KeyedRandom::select_stream(const StreamKey& key) {
  state_ = derive_seed(seed_, {static_cast<std::uint64_t>(key.purpose), key.round,
                               static_cast<std::uint64_t>(key.depth),
                               static_cast<std::uint64_t>(key.index)});
}

std::uint64_t KeyedRandom::next_u64() {
  state_ += kGolden;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double KeyedRandom::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

bool KeyedRandom::bernoulli(double p) { return uniform() < p; }

std::size_t KeyedRandom::categorical(std::span<const double> weights) {
  return sample_index(weights, uniform());
}

double GeneratorRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double GeneratorRng::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double GeneratorRng::gamma(double shape) {
  if (!(shape > 0.0)) fail(ErrorKind::kInvalidArgument, "gamma shape must be positive");
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace specdraft
