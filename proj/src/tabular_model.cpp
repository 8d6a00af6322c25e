#include "specdraft/tabular_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specdraft/error.hpp"
#include "specdraft/random.hpp"

namespace specdraft {

namespace {

constexpr std::size_t kMaxTableEntries = std::size_t{1} << 26;

std::size_t checked_context_count(std::size_t vocab_size, std::size_t order) {
  if (vocab_size == 0) fail(ErrorKind::kInvalidArgument, "vocab_size must be positive");
  if (order == 0) fail(ErrorKind::kInvalidArgument, "n-gram order must be at least 1");
  std::size_t count = 1;
  for (std::size_t i = 1; i < order; ++i) {
    count *= vocab_size + 1;
    if (count * vocab_size > kMaxTableEntries) {
      fail(ErrorKind::kInvalidArgument, "tabular model too large for a dense table");
    }
  }
  return count;
}

void dirichlet_row(GeneratorRng& rng, double concentration, std::span<double> out) {
  double total = 0.0;
  for (double& x : out) {
    x = rng.gamma(concentration);
    total += x;
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed; fall back to uniform.
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return;
  }
  for (double& x : out) x /= total;
}

}  // namespace

TabularModel::TabularModel(std::size_t vocab_size, std::size_t order, std::vector<double> rows,
                           double temperature, double tolerance)
    : vocab_size_(vocab_size),
      order_(order),
      context_count_(checked_context_count(vocab_size, order)),
      rows_(std::move(rows)) {
  if (rows_.size() != context_count_ * vocab_size_) {
    fail(ErrorKind::kInvariantViolation,
         "expected " + std::to_string(context_count_) + " rows of " + std::to_string(vocab_size_) +
             " probabilities, got " + std::to_string(rows_.size()) + " values");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorKind::kInvalidArgument, "temperature must be positive");
  }
  for (std::size_t c = 0; c < context_count_; ++c) {
    std::span<double> r(rows_.data() + c * vocab_size_, vocab_size_);
    double total = 0.0;
    for (double p : r) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        fail(ErrorKind::kInvariantViolation, "row " + std::to_string(c) + " has a negative entry");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > tolerance) {
      fail(ErrorKind::kInvariantViolation,
           "row " + std::to_string(c) + " sums to " + std::to_string(total));
    }
    if (temperature != 1.0) {
      for (double& p : r) p = std::pow(p, 1.0 / temperature);
    }
    normalize_in_place(r);
  }
}

TabularModel TabularModel::generate(std::size_t vocab_size, std::size_t order,
                                    const TabularGenerator& generator, double temperature) {
  if (!(generator.concentration > 0.0)) {
    fail(ErrorKind::kInvalidArgument, "Dirichlet concentration must be positive");
  }
  const std::size_t contexts = checked_context_count(vocab_size, order);
  std::vector<double> rows(contexts * vocab_size);
  GeneratorRng rng(generator.seed);
  for (std::size_t c = 0; c < contexts; ++c) {
    dirichlet_row(rng, generator.concentration, {rows.data() + c * vocab_size, vocab_size});
  }
  if (generator.perturb) {
    const RowPerturbation& p = *generator.perturb;
    if (!(p.weight >= 0.0 && p.weight <= 1.0)) {
      fail(ErrorKind::kInvalidArgument, "perturbation weight must be in [0, 1]");
    }
    if (!(p.concentration > 0.0)) {
      fail(ErrorKind::kInvalidArgument, "perturbation concentration must be positive");
    }
    GeneratorRng noise_rng(p.seed);
    std::vector<double> noise(vocab_size);
    for (std::size_t c = 0; c < contexts; ++c) {
      dirichlet_row(noise_rng, p.concentration, noise);
      for (std::size_t v = 0; v < vocab_size; ++v) {
        double& x = rows[c * vocab_size + v];
        x = (1.0 - p.weight) * x + p.weight * noise[v];
      }
    }
  }
  return TabularModel(vocab_size, order, std::move(rows), temperature);
}

std::size_t TabularModel::state_dim() const { return std::max<std::size_t>(order_ - 1, 1); }

void TabularModel::advance(DrafterState& state, TokenId token) const {
  check_token(token);
  if (state.payload.size() != state_dim()) {
    fail(ErrorKind::kInvalidInput, "state does not belong to this tabular model");
  }
  if (order_ > 1) {
    std::shift_left(state.payload.begin(), state.payload.end(), 1);
    state.payload.back() = static_cast<double>(token) + 1.0;
  }
  ++state.position;
}

void TabularModel::predict(const DrafterState& state, std::span<double> probs) const {
  if (probs.size() != vocab_size_) fail(ErrorKind::kInvalidInput, "output span has wrong size");
  const std::span<const double> r = row(state_context_index(state));
  std::copy(r.begin(), r.end(), probs.begin());
}

std::span<const double> TabularModel::row(std::size_t context_index) const {
  if (context_index >= context_count_) fail(ErrorKind::kInvalidInput, "context index out of range");
  return {rows_.data() + context_index * vocab_size_, vocab_size_};
}

std::size_t TabularModel::context_index(std::span<const TokenId> history) const {
  const std::size_t width = order_ - 1;
  std::size_t index = 0;
  for (std::size_t j = 0; j < width; ++j) {
    // Position j of the context window; positions before the history are BOS.
    const std::size_t missing = width > history.size() ? width - history.size() : 0;
    std::size_t digit = 0;
    if (j >= missing) {
      const TokenId t = history[history.size() - (width - j)];
      check_token(t);
      digit = static_cast<std::size_t>(t) + 1;
    }
    index = index * (vocab_size_ + 1) + digit;
  }
  return index;
}

std::span<const double> TabularModel::row_for(std::span<const TokenId> history) const {
  return row(context_index(history));
}

std::size_t TabularModel::state_context_index(const DrafterState& state) const {
  if (state.payload.size() != state_dim()) {
    fail(ErrorKind::kInvalidInput, "state does not belong to this tabular model");
  }
  if (order_ == 1) return 0;
  std::size_t index = 0;
  for (double digit : state.payload) {
    index = index * (vocab_size_ + 1) + static_cast<std::size_t>(digit);
  }
  return index;
}

}  // namespace specdraft
