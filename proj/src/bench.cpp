#include "specdraft/bench.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "specdraft/error.hpp"
#include "specdraft/model_file.hpp"
#include "specdraft/random.hpp"

#ifndef SPECDRAFT_BUILD_ID
#define SPECDRAFT_BUILD_ID "specdraft-dev"
#endif

namespace specdraft {

// nlohmann finds these through ADL.
void to_json(nlohmann::json& j, const RunRow& r) {
  j = {{"prompt_idx", r.prompt_idx},         {"rep", r.rep},
       {"seed", r.seed},                     {"committed", r.committed},
       {"forward_passes", r.forward_passes}, {"acceptance_length", r.acceptance_length},
       {"throughput", r.throughput},         {"wall_time_s", r.wall_time_s},
       {"arm_selections", r.arm_selections}};
}

void from_json(const nlohmann::json& j, RunRow& r) {
  j.at("prompt_idx").get_to(r.prompt_idx);
  j.at("rep").get_to(r.rep);
  j.at("seed").get_to(r.seed);
  j.at("committed").get_to(r.committed);
  j.at("forward_passes").get_to(r.forward_passes);
  j.at("acceptance_length").get_to(r.acceptance_length);
  j.at("throughput").get_to(r.throughput);
  j.at("wall_time_s").get_to(r.wall_time_s);
  j.at("arm_selections").get_to(r.arm_selections);
}

void to_json(nlohmann::json& j, const Aggregate& a) { j = {{"mean", a.mean}, {"std", a.std}}; }

void from_json(const nlohmann::json& j, Aggregate& a) {
  j.at("mean").get_to(a.mean);
  j.at("std").get_to(a.std);
}

void to_json(nlohmann::json& j, const StrategyResult& s) {
  j = {{"strategy", s.strategy},
       {"errored", s.errored},
       {"error", s.error},
       {"runs", s.runs},
       {"throughput", s.throughput},
       {"acceptance_length", s.acceptance_length},
       {"arm_selections", s.arm_selections}};
}

void from_json(const nlohmann::json& j, StrategyResult& s) {
  j.at("strategy").get_to(s.strategy);
  j.at("errored").get_to(s.errored);
  j.at("error").get_to(s.error);
  j.at("runs").get_to(s.runs);
  j.at("throughput").get_to(s.throughput);
  j.at("acceptance_length").get_to(s.acceptance_length);
  j.at("arm_selections").get_to(s.arm_selections);
}

void to_json(nlohmann::json& j, const ResultRecord& r) {
  j = {{"experiment_id", r.experiment_id},
       {"rows", r.rows},
       {"environment",
        {{"clock_resolution_s", r.environment.clock_resolution_s},
         {"build_id", r.environment.build_id}}}};
}

void from_json(const nlohmann::json& j, ResultRecord& r) {
  j.at("experiment_id").get_to(r.experiment_id);
  j.at("rows").get_to(r.rows);
  j.at("environment").at("clock_resolution_s").get_to(r.environment.clock_resolution_s);
  j.at("environment").at("build_id").get_to(r.environment.build_id);
}

namespace {

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

EnvironmentStamp environment_stamp() {
  using Period = std::chrono::steady_clock::period;
  return EnvironmentStamp{static_cast<double>(Period::num) / static_cast<double>(Period::den),
                          SPECDRAFT_BUILD_ID};
}

struct LoadedModels {
  std::shared_ptr<const Model> target;
  std::shared_ptr<const Model> drafter;
};

LoadedModels load_models(const ExperimentSpec& spec) {
  LoadedModels m{spec.target, spec.drafter};
  if (!m.target) m.target = load_model(spec.target_path);
  if (!m.drafter) m.drafter = load_model(spec.drafter_path);
  if (m.target->vocab_size() != m.drafter->vocab_size()) {
    fail(ErrorKind::kInvalidConfig, "target and drafter vocab sizes differ");
  }
  return m;
}

StrategyResult run_strategy(const LoadedModels& models,
                            const std::vector<std::vector<TokenId>>& prompts,
                            const ExperimentSpec& spec, const Strategy& strategy) {
  StrategyResult result;
  result.strategy = describe(strategy);
  const std::size_t total = prompts.size() * spec.repetitions;
  result.runs.resize(total);
  std::vector<std::string> errors(total);

  auto run_one = [&](std::size_t task) {
    const std::size_t prompt_idx = task / spec.repetitions;
    const std::size_t rep = task % spec.repetitions;
    GenerationConfig config = spec.generation;
    config.strategy = strategy;
    config.seed = run_seed(spec.generation.seed, prompt_idx, rep);
    RunRow& row = result.runs[task];
    row.prompt_idx = prompt_idx;
    row.rep = rep;
    row.seed = config.seed;
    try {
      const GenerationResult gen =
          generate(*models.target, *models.drafter, prompts[prompt_idx], config);
      row.committed = gen.metrics.committed_total;
      row.forward_passes = gen.metrics.target_forward_passes;
      row.acceptance_length = gen.metrics.acceptance_length();
      row.throughput = gen.metrics.throughput();
      row.wall_time_s = gen.metrics.wall_time_s;
      row.arm_selections = gen.metrics.arm_selections;
    } catch (const std::exception& e) {
      errors[task] = e.what();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(spec.threads, total));
  if (threads == 1) {
    for (std::size_t t = 0; t < total; ++t) run_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t t = next++; t < total; t = next++) run_one(t);
      });
    }
  }

  for (const std::string& e : errors) {
    if (!e.empty()) {
      result.errored = true;
      result.error = e;
      result.runs.clear();
      return result;
    }
  }

  std::vector<double> throughput;
  std::vector<double> acceptance;
  for (const RunRow& row : result.runs) {
    throughput.push_back(row.throughput);
    acceptance.push_back(row.acceptance_length);
    if (result.arm_selections.size() < row.arm_selections.size()) {
      result.arm_selections.resize(row.arm_selections.size(), 0);
    }
    for (std::size_t k = 0; k < row.arm_selections.size(); ++k) {
      result.arm_selections[k] += row.arm_selections[k];
    }
  }
  result.throughput = aggregate(throughput);
  result.acceptance_length = aggregate(acceptance);
  return result;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out << content;
    if (!out) fail(ErrorKind::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::kIo, "cannot move report into " + path.string());
  }
}

}  // namespace

PromptSource parse_prompt_source(std::string_view text) {
  constexpr std::string_view kSynthetic = "synthetic:";
  PromptSource src;
  if (text.substr(0, kSynthetic.size()) != kSynthetic) {
    src.file = std::filesystem::path(text);
    return src;
  }
  std::uint64_t parts[3] = {0, 0, 0};
  std::string_view rest = text.substr(kSynthetic.size());
  for (int i = 0; i < 3; ++i) {
    const std::size_t colon = i < 2 ? rest.find(':') : rest.size();
    if (colon == std::string_view::npos) fail(ErrorKind::kInvalidConfig, "expected synthetic:SEED:COUNT:LEN");
    const std::string_view item = rest.substr(0, colon);
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), parts[i]);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      fail(ErrorKind::kInvalidConfig, "bad synthetic prompt spec '" + std::string(text) + "'");
    }
    rest = colon < rest.size() ? rest.substr(colon + 1) : std::string_view{};
  }
  src.seed = parts[0];
  src.count = parts[1];
  src.length = parts[2];
  if (src.count == 0) fail(ErrorKind::kInvalidConfig, "synthetic prompt count must be positive");
  return src;
}

std::vector<std::vector<TokenId>> parse_prompt_text(std::string_view text) {
  std::vector<std::vector<TokenId>> prompts;
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream tokens(line);
    std::vector<TokenId> prompt;
    std::string item;
    while (tokens >> item) {
      TokenId t = 0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), t);
      if (ec != std::errc() || ptr != item.data() + item.size()) {
        fail(ErrorKind::kInvalidConfig, "bad token '" + item + "' on prompt line " + std::to_string(line_no));
      }
      prompt.push_back(t);
    }
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

std::vector<std::vector<TokenId>> load_prompts(const PromptSource& source, std::size_t vocab_size) {
  std::vector<std::vector<TokenId>> prompts;
  if (source.file) {
    std::ifstream in(*source.file);
    if (!in) fail(ErrorKind::kInvalidConfig, "cannot open prompt file " + source.file->string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    prompts = parse_prompt_text(buffer.str());
    for (const auto& p : prompts) {
      for (TokenId t : p) {
        if (t >= vocab_size) fail(ErrorKind::kInvalidConfig, "prompt token outside the vocabulary");
      }
    }
  } else {
    KeyedRandom rng(source.seed);
    for (std::size_t i = 0; i < source.count; ++i) {
      rng.select_stream({StreamPurpose::kPrompt, i, 0, 0});
      std::vector<TokenId> prompt(source.length);
      for (TokenId& t : prompt) t = static_cast<TokenId>(rng.next_u64() % vocab_size);
      prompts.push_back(std::move(prompt));
    }
  }
  if (prompts.empty()) fail(ErrorKind::kInvalidConfig, "no prompts");
  return prompts;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "json") return ReportFormat::kJson;
  if (text == "plotdata") return ReportFormat::kPlotData;
  fail(ErrorKind::kInvalidConfig, "unknown report format '" + std::string(text) + "'");
}

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t prompt_idx, std::size_t rep) {
  return derive_seed(master_seed, {prompt_idx, rep});
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  if (values.empty()) return a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

ResultRecord run_experiment(const ExperimentSpec& spec) {
  if (spec.repetitions == 0) fail(ErrorKind::kInvalidConfig, "repetitions must be at least 1");
  if (spec.strategies.empty()) fail(ErrorKind::kInvalidConfig, "no strategies to run");
  const LoadedModels models = load_models(spec);
  const auto prompts = load_prompts(spec.prompts, models.target->vocab_size());
  ResultRecord record;
  record.experiment_id = spec.experiment_id;
  record.environment = environment_stamp();
  for (const Strategy& s : spec.strategies) {
    record.rows.push_back(run_strategy(models, prompts, spec, s));
  }
  return record;
}

ResultRecord sweep_tree_configs(const ExperimentSpec& spec, std::span<const TreeConfig> configs) {
  if (configs.empty()) fail(ErrorKind::kInvalidConfig, "sweep needs at least one config");
  ExperimentSpec sweep = spec;
  sweep.strategies.clear();
  for (const TreeConfig& c : configs) sweep.strategies.emplace_back(FixedTreeStrategy{c});
  return run_experiment(sweep);
}

ResultRecord compare_fixed_vs_bandit(const ExperimentSpec& spec, const TreeConfig& fixed,
                                     const BanditStrategy& arms) {
  if (arms.arms.empty()) fail(ErrorKind::kInvalidConfig, "bandit needs at least one arm");
  ExperimentSpec compare = spec;
  compare.strategies = {FixedTreeStrategy{fixed}, arms};
  return run_experiment(compare);
}

std::string render_report(const ResultRecord& record, ReportFormat format) {
  std::string out;
  switch (format) {
    case ReportFormat::kCsv: {
      out += kCsvHeader;
      out += '\n';
      for (const StrategyResult& s : record.rows) {
        for (const RunRow& r : s.runs) {
          out += csv_quote(record.experiment_id) + ',' + csv_quote(s.strategy) + ',' +
                 std::to_string(r.prompt_idx) + ',' + std::to_string(r.rep) + ',' +
                 std::to_string(r.committed) + ',' + std::to_string(r.forward_passes) + ',' +
                 format_double(r.acceptance_length) + ',' + format_double(r.throughput) + ',' +
                 format_double(r.wall_time_s) + '\n';
        }
      }
      break;
    }
    case ReportFormat::kJson:
      out = nlohmann::json(record).dump(2) + '\n';
      break;
    case ReportFormat::kPlotData: {
      out = "chart,x,y,label\n";
      for (const char* chart : {"throughput", "acceptance_length"}) {
        std::size_t x = 0;
        for (const StrategyResult& s : record.rows) {
          if (s.errored) continue;
          const double y = std::string_view(chart) == "throughput" ? s.throughput.mean
                                                                    : s.acceptance_length.mean;
          out += std::string(chart) + ',' + std::to_string(x++) + ',' + format_double(y) + ',' +
                 csv_quote(s.strategy) + '\n';
        }
      }
      break;
    }
  }
  return out;
}

void emit_report(const ResultRecord& record, ReportFormat format, const std::filesystem::path& path) {
  write_file_atomically(path, render_report(record, format));
}

ResultRecord parse_result_json(std::string_view text) {
  try {
    return nlohmann::json::parse(text).get<ResultRecord>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("result record: ") + e.what());
  }
}

}  // namespace specdraft
