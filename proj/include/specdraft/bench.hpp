#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specdraft/engine.hpp"
#include "specdraft/model.hpp"

namespace specdraft {

// Either a prompt file (one prompt per line, space-separated token ids,
// blank lines skipped) or "synthetic:SEED:COUNT:LEN".
struct PromptSource {
  std::optional<std::filesystem::path> file;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t length = 0;
};

PromptSource parse_prompt_source(std::string_view text);
std::vector<std::vector<TokenId>> parse_prompt_text(std::string_view text);
std::vector<std::vector<TokenId>> load_prompts(const PromptSource& source, std::size_t vocab_size);

enum class ReportFormat { kCsv, kJson, kPlotData };

ReportFormat parse_report_format(std::string_view text);

struct ExperimentSpec {
  std::string experiment_id = "experiment";
  std::filesystem::path target_path;
  std::filesystem::path drafter_path;
  // Preloaded models take precedence over the paths.
  std::shared_ptr<const Model> target;
  std::shared_ptr<const Model> drafter;
  PromptSource prompts;
  // Mode, token budget, stop tokens, master seed and timing switch; the
  // strategy field is replaced by each entry of `strategies`.
  GenerationConfig generation;
  std::vector<Strategy> strategies;
  std::size_t repetitions = 1;
  std::size_t threads = 1;
};

struct RunRow {
  std::size_t prompt_idx = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::size_t committed = 0;
  std::size_t forward_passes = 0;
  double acceptance_length = 0.0;
  double throughput = 0.0;
  double wall_time_s = 0.0;
  std::vector<std::uint64_t> arm_selections;

  friend bool operator==(const RunRow&, const RunRow&) = default;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run

  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct StrategyResult {
  std::string strategy;
  bool errored = false;
  std::string error;
  std::vector<RunRow> runs;
  Aggregate throughput;
  Aggregate acceptance_length;
  std::vector<std::uint64_t> arm_selections;  // summed over runs

  friend bool operator==(const StrategyResult&, const StrategyResult&) = default;
};

struct EnvironmentStamp {
  double clock_resolution_s = 0.0;
  std::string build_id;

  friend bool operator==(const EnvironmentStamp&, const EnvironmentStamp&) = default;
};

struct ResultRecord {
  std::string experiment_id;
  std::vector<StrategyResult> rows;
  EnvironmentStamp environment;

  friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

// Per-run seed shared by every strategy, so comparisons are matched.
std::uint64_t run_seed(std::uint64_t master_seed, std::size_t prompt_idx, std::size_t rep);

Aggregate aggregate(std::span<const double> values);

// Loads models and prompts (failures throw), then runs each strategy over
// prompts x repetitions. A strategy that fails at runtime is marked errored
// without affecting the others.
ResultRecord run_experiment(const ExperimentSpec& spec);
ResultRecord sweep_tree_configs(const ExperimentSpec& spec, std::span<const TreeConfig> configs);
// Row 0 is the fixed tree, row 1 the bandit over `arms`.
ResultRecord compare_fixed_vs_bandit(const ExperimentSpec& spec, const TreeConfig& fixed,
                                     const BanditStrategy& arms);

inline constexpr std::string_view kCsvHeader =
    "experiment_id,strategy,prompt_idx,rep,committed,forward_passes,acceptance_length,"
    "throughput,wall_time_s";

std::string render_report(const ResultRecord& record, ReportFormat format);
// Writes through a temporary file and renames, so a failure leaves no partial output.
void emit_report(const ResultRecord& record, ReportFormat format, const std::filesystem::path& path);

ResultRecord parse_result_json(std::string_view text);

}  // namespace specdraft
