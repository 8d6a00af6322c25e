#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "specdraft/model.hpp"

namespace specdraft {

// JSON model files, format_version 1:
//
//   {"format_version": 1, "kind": "tabular", "vocab_size": V, "order": n,
//    "rows": [[...], ...]}                      // (V+1)^(n-1) rows of V
//   {"format_version": 1, "kind": "tabular", "vocab_size": V, "order": n,
//    "generator": {"seed": s, "concentration": c,
//                  "perturb": {"seed": s2, "concentration": c2, "weight": w}}}
//   {"format_version": 1, "kind": "ssm", "vocab_size": V, "state_dim": d,
//    "generator": {"seed": s, "output_scale": k}}
//   {"format_version": 1, "kind": "ssm", "vocab_size": V, "state_dim": d,
//    "parameters": {"decay": [...], "embedding": [[...]], "gate": [[...]],
//                   "output": [[...]]}}
//
// An optional "temperature" (default 1) is applied at load time. Explicit
// rows must sum to 1 within 1e-6.
std::shared_ptr<const Model> parse_model(std::string_view text);
std::shared_ptr<const Model> load_model(const std::filesystem::path& path);

// Writes explicit rows or parameters (never a generator), with doubles at
// full round-trip precision.
std::string serialize_model(const Model& model);
void save_model(const std::filesystem::path& path, const Model& model);

}  // namespace specdraft
