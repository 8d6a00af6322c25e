#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "specdraft/model.hpp"

namespace specdraft {

// Parameters of a diagonal selective linear recurrence:
//   h' = decay * h + sigmoid(gate[x]) * embedding[x]
//   logits = output * h'
// Matrices are row-major with one row per token.
struct SsmParameters {
  std::size_t vocab_size = 0;
  std::size_t state_dim = 0;
  std::vector<double> decay;      // state_dim entries in [0, 1)
  std::vector<double> embedding;  // vocab_size x state_dim
  std::vector<double> gate;       // vocab_size x state_dim, pre-sigmoid
  std::vector<double> output;     // vocab_size x state_dim

  friend bool operator==(const SsmParameters&, const SsmParameters&) = default;
};

struct SsmGenerator {
  std::uint64_t seed = 0;
  // Output weights are N(0, 1) * output_scale / sqrt(state_dim).
  double output_scale = 4.0;
};

class SsmDrafter final : public Model {
 public:
  explicit SsmDrafter(SsmParameters params, double temperature = 1.0);

  // Draw order: decay logits ~ N(2, 1) squashed by sigmoid, then
  // embedding, gate and output, each row-major from one GeneratorRng.
  static SsmDrafter generate(std::size_t vocab_size, std::size_t state_dim,
                             const SsmGenerator& generator, double temperature = 1.0);

  std::string_view kind() const override { return "ssm"; }
  std::size_t vocab_size() const override { return params_.vocab_size; }
  std::size_t state_dim() const override { return params_.state_dim; }
  void advance(DrafterState& state, TokenId token) const override;
  void predict(const DrafterState& state, std::span<double> probs) const override;

  const SsmParameters& parameters() const { return params_; }
  double temperature() const { return temperature_; }

 private:
  SsmParameters params_;
  double temperature_;
  std::vector<double> gated_input_;  // sigmoid(gate) * embedding, per token
};

}  // namespace specdraft
