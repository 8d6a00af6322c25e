#include "fixtures.hpp"

#include <algorithm>

#include "exact_enumerator.hpp"

namespace specdraft::testing {

ModelPair tabular_pair(std::uint64_t seed, std::size_t vocab, std::size_t order,
                       double concentration, double perturb_weight) {
  TabularGenerator base{seed, concentration, std::nullopt};
  TabularGenerator drafted = base;
  drafted.perturb = RowPerturbation{seed ^ 0x5bd1e995u, concentration, perturb_weight};
  return {std::make_shared<TabularModel>(TabularModel::generate(vocab, order, base)),
          std::make_shared<TabularModel>(TabularModel::generate(vocab, order, drafted))};
}

SequenceDist autoregressive_distribution(const Model& model, std::span<const TokenId> prompt,
                                         std::size_t horizon) {
  SequenceDist out;
  std::vector<TokenId> seq;
  std::vector<double> probs(model.vocab_size());
  std::function<void(const DrafterState&, double)> walk = [&](const DrafterState& state,
                                                              double mass) {
    if (seq.size() == horizon) {
      out[seq] += mass;
      return;
    }
    model.predict(state, probs);
    const std::vector<double> here = probs;
    for (TokenId t = 0; t < here.size(); ++t) {
      if (here[t] == 0.0) continue;
      DrafterState next = state;
      model.advance(next, t);
      seq.push_back(t);
      walk(next, mass * here[t]);
      seq.pop_back();
    }
  };
  walk(drafter_init(model, prompt), 1.0);
  return out;
}

SequenceDist speculative_distribution(const Model& target, const Model& drafter,
                                      std::span<const TokenId> prompt, std::size_t horizon,
                                      DecodeMode mode, const RoundFn& round) {
  // Rounds only depend on the model states, so prefixes that leave both
  // states equal share one enumeration.
  std::map<std::vector<double>, SequenceDist> round_cache;
  auto round_dist = [&](const std::vector<TokenId>& generated) -> const SequenceDist& {
    std::vector<TokenId> context(prompt.begin(), prompt.end());
    context.insert(context.end(), generated.begin(), generated.end());
    const Decoder probe(target, drafter, context, mode);
    std::vector<double> key = probe.drafter_state().payload;
    key.push_back(-1.0);
    key.insert(key.end(), probe.target_state().payload.begin(), probe.target_state().payload.end());
    auto it = round_cache.find(key);
    if (it != round_cache.end()) return it->second;
    SequenceDist dist = enumerate_outcomes([&](RandomSource& rng) {
      Decoder decoder(target, drafter, context, mode);
      return round(decoder, rng).committed;
    });
    return round_cache.emplace(std::move(key), std::move(dist)).first->second;
  };

  SequenceDist out;
  std::function<void(const std::vector<TokenId>&, double)> walk =
      [&](const std::vector<TokenId>& generated, double mass) {
        if (generated.size() >= horizon) {
          out[std::vector<TokenId>(generated.begin(), generated.begin() + horizon)] += mass;
          return;
        }
        const SequenceDist& next = round_dist(generated);
        for (const auto& [committed, p] : next) {
          std::vector<TokenId> extended = generated;
          extended.insert(extended.end(), committed.begin(), committed.end());
          walk(extended, mass * p);
        }
      };
  walk({}, 1.0);
  return out;
}

}  // namespace specdraft::testing
