#include "specdraft/ssm_drafter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "specdraft/error.hpp"
#include "specdraft/random.hpp"

namespace specdraft {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_size(const std::vector<double>& v, std::size_t n, const char* name) {
  if (v.size() != n) {
    fail(ErrorKind::kInvariantViolation, std::string("ssm parameter '") + name +
                                             "' has " + std::to_string(v.size()) +
                                             " values, expected " + std::to_string(n));
  }
  for (double x : v) {
    if (!std::isfinite(x)) {
      fail(ErrorKind::kInvariantViolation, std::string("ssm parameter '") + name + "' not finite");
    }
  }
}

}  // namespace

SsmDrafter::SsmDrafter(SsmParameters params, double temperature)
    : params_(std::move(params)), temperature_(temperature) {
  const std::size_t v = params_.vocab_size;
  const std::size_t d = params_.state_dim;
  if (v == 0) fail(ErrorKind::kInvalidArgument, "vocab_size must be positive");
  if (d == 0) fail(ErrorKind::kInvalidArgument, "state_dim must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorKind::kInvalidArgument, "temperature must be positive");
  }
  require_size(params_.decay, d, "decay");
  require_size(params_.embedding, v * d, "embedding");
  require_size(params_.gate, v * d, "gate");
  require_size(params_.output, v * d, "output");
  for (double a : params_.decay) {
    if (!(a >= 0.0 && a < 1.0)) fail(ErrorKind::kInvariantViolation, "decay must lie in [0, 1)");
  }
  gated_input_.resize(v * d);
  for (std::size_t i = 0; i < v * d; ++i) {
    gated_input_[i] = sigmoid(params_.gate[i]) * params_.embedding[i];
  }
}

SsmDrafter SsmDrafter::generate(std::size_t vocab_size, std::size_t state_dim,
                                const SsmGenerator& generator, double temperature) {
  if (vocab_size == 0 || state_dim == 0) {
    fail(ErrorKind::kInvalidArgument, "vocab_size and state_dim must be positive");
  }
  GeneratorRng rng(generator.seed);
  SsmParameters p;
  p.vocab_size = vocab_size;
  p.state_dim = state_dim;
  p.decay.resize(state_dim);
  for (double& a : p.decay) a = std::min(sigmoid(2.0 + rng.normal()), 1.0 - 1e-12);
  auto fill = [&](std::vector<double>& m, double scale) {
    m.resize(vocab_size * state_dim);
    for (double& x : m) x = rng.normal() * scale;
  };
  fill(p.embedding, 1.0);
  fill(p.gate, 1.0);
  fill(p.output, generator.output_scale / std::sqrt(static_cast<double>(state_dim)));
  return SsmDrafter(std::move(p), temperature);
}

void SsmDrafter::advance(DrafterState& state, TokenId token) const {
  check_token(token);
  const std::size_t d = params_.state_dim;
  if (state.payload.size() != d) fail(ErrorKind::kInvalidInput, "state has wrong dimension");
  const double* input = gated_input_.data() + static_cast<std::size_t>(token) * d;
  double* h = state.payload.data();
  for (std::size_t i = 0; i < d; ++i) h[i] = params_.decay[i] * h[i] + input[i];
  ++state.position;
}

void SsmDrafter::predict(const DrafterState& state, std::span<double> probs) const {
  const std::size_t v = params_.vocab_size;
  const std::size_t d = params_.state_dim;
  if (state.payload.size() != d) fail(ErrorKind::kInvalidInput, "state has wrong dimension");
  if (probs.size() != v) fail(ErrorKind::kInvalidInput, "output span has wrong size");
  const double* h = state.payload.data();
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < v; ++t) {
    const double* w = params_.output.data() + t * d;
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += w[i] * h[i];
    probs[t] = acc / temperature_;
    max_logit = std::max(max_logit, probs[t]);
  }
  double total = 0.0;
  for (double& x : probs) {
    x = std::exp(x - max_logit);
    total += x;
  }
  for (double& x : probs) x /= total;
}

}  // namespace specdraft
