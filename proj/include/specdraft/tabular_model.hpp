#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "specdraft/model.hpp"

namespace specdraft {

// Mixes a second Dirichlet draw into every generated row:
// row = (1 - weight) * base + weight * noise. Lets a drafter share a base
// seed with its target and differ by a controlled amount.
struct RowPerturbation {
  std::uint64_t seed = 0;
  double concentration = 1.0;
  double weight = 0.0;
};

struct TabularGenerator {
  std::uint64_t seed = 0;
  double concentration = 1.0;
  std::optional<RowPerturbation> perturb;
};

// Exact n-gram table. Contexts are the last order-1 tokens, oldest first,
// left-padded with BOS. Each context position is a digit in [0, vocab]:
// 0 is BOS and token t is t + 1. Rows are stored densely in row-major
// order of those digits, oldest digit most significant.
//
// As a recurrent model the state payload holds the context digits, so the
// zero state is the all-BOS context.
class TabularModel final : public Model {
 public:
  // `rows` is context_count * vocab_size probabilities. Each row must be
  // non-negative and sum to 1 within `tolerance`; rows are renormalized,
  // then tempered by p^(1/temperature).
  TabularModel(std::size_t vocab_size, std::size_t order, std::vector<double> rows,
               double temperature = 1.0, double tolerance = 1e-6);

  // Rows drawn from a symmetric Dirichlet(concentration) in row-major
  // order using GeneratorRng(seed).
  static TabularModel generate(std::size_t vocab_size, std::size_t order,
                               const TabularGenerator& generator, double temperature = 1.0);

  std::string_view kind() const override { return "tabular"; }
  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t state_dim() const override;
  void advance(DrafterState& state, TokenId token) const override;
  void predict(const DrafterState& state, std::span<double> probs) const override;

  std::size_t order() const { return order_; }
  std::size_t context_count() const { return context_count_; }
  std::span<const double> rows() const { return rows_; }
  std::span<const double> row(std::size_t context_index) const;

  // Row for the context formed by the tail of `history`.
  std::size_t context_index(std::span<const TokenId> history) const;
  std::span<const double> row_for(std::span<const TokenId> history) const;

 private:
  std::size_t state_context_index(const DrafterState& state) const;

  std::size_t vocab_size_;
  std::size_t order_;
  std::size_t context_count_;
  std::vector<double> rows_;
};

}  // namespace specdraft
