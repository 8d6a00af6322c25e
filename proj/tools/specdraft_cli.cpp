// specdraft: run, sweep and compare speculative decoding strategies on
// model files, or re-render a saved JSON result.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "specdraft/bench.hpp"
#include "specdraft/error.hpp"
#include "specdraft/model_file.hpp"

namespace {

using namespace specdraft;

constexpr int kExitConfig = 2;
constexpr int kExitModel = 3;
constexpr int kExitRuntime = 4;

struct Options {
  std::string target;
  std::string drafter;
  std::string mode = "sample";
  std::vector<std::string> strategies;
  double lambda_ucb = 1.0;
  std::string lambda_gamma = "auto";
  std::size_t max_new_tokens = 128;
  std::string prompts = "synthetic:0:8:16";
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  bool no_timing = false;
  std::string experiment_id = "experiment";
  std::string configs;
  std::string fixed = "3,2,2,1,1";
  std::string arms = "3,3,2,1;3,2,2,1,1;2,2,2,1,1,1";
  std::string in;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kInvalidArgument:
      return kExitConfig;
    case ErrorKind::kParse:
    case ErrorKind::kInvariantViolation:
    case ErrorKind::kUnsupportedVersion:
      return kExitModel;
    default:
      return kExitRuntime;
  }
}

std::size_t thread_cap() {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SPECDRAFT_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) {
      fail(ErrorKind::kInvalidConfig, "SPECDRAFT_THREADS must be a positive integer");
    }
    cap = std::min<std::size_t>(cap, v);
  }
  return cap;
}

// Applies --lambda-ucb/--lambda-gamma to a bandit strategy.
Strategy with_bandit_params(Strategy s, const Options& o) {
  if (auto* b = std::get_if<BanditStrategy>(&s)) {
    b->lambda_ucb = o.lambda_ucb;
    if (o.lambda_gamma == "auto") {
      b->lambda_gamma.reset();
    } else {
      try {
        std::size_t used = 0;
        b->lambda_gamma = std::stod(o.lambda_gamma, &used);
        if (used != o.lambda_gamma.size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        fail(ErrorKind::kInvalidConfig, "--lambda-gamma must be a number or 'auto'");
      }
      if (*b->lambda_gamma < 0.0) fail(ErrorKind::kInvalidConfig, "--lambda-gamma must be >= 0");
    }
  }
  return s;
}

ExperimentSpec build_spec(const Options& o) {
  ExperimentSpec spec;
  spec.experiment_id = o.experiment_id;
  if (o.mode == "greedy") {
    spec.generation.mode = DecodeMode::kGreedy;
  } else if (o.mode == "sample") {
    spec.generation.mode = DecodeMode::kSampling;
  } else {
    fail(ErrorKind::kInvalidConfig, "--mode must be greedy or sample");
  }
  spec.generation.max_new_tokens = o.max_new_tokens;
  spec.generation.seed = o.seed;
  spec.generation.measure_timing = !o.no_timing;
  spec.prompts = parse_prompt_source(o.prompts);
  spec.repetitions = o.reps;
  spec.threads = thread_cap();
  for (const std::string& s : o.strategies) {
    spec.strategies.push_back(with_bandit_params(parse_strategy(s), o));
  }
  return spec;
}

// Model failures (missing file, bad JSON, bad rows) all map to one exit code.
void load_models(ExperimentSpec& spec, const Options& o) {
  if (o.target.empty() || o.drafter.empty()) {
    fail(ErrorKind::kInvalidConfig, "--target and --drafter are required");
  }
  try {
    spec.target = load_model(o.target);
    spec.drafter = load_model(o.drafter);
  } catch (const Error& e) {
    std::cerr << "model error: " << e.what() << '\n';
    std::exit(kExitModel);
  }
  if (spec.target->vocab_size() != spec.drafter->vocab_size()) {
    std::cerr << "model error: target and drafter vocab sizes differ\n";
    std::exit(kExitModel);
  }
}

void write_output(const ResultRecord& record, const Options& o) {
  const ReportFormat format = parse_report_format(o.format);
  if (o.out.empty()) {
    std::cout << render_report(record, format);
  } else {
    emit_report(record, format, o.out);
  }
}

int finish(const ResultRecord& record, const Options& o) {
  write_output(record, o);
  int code = 0;
  for (const StrategyResult& s : record.rows) {
    if (s.errored) {
      std::cerr << "strategy " << s.strategy << " failed: " << s.error << '\n';
      code = kExitRuntime;
    }
  }
  return code;
}

void add_run_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--target", o.target, "target model file");
  cmd->add_option("--drafter", o.drafter, "drafter model file");
  cmd->add_option("--mode", o.mode, "greedy or sample");
  cmd->add_option("--lambda-ucb", o.lambda_ucb, "UCB exploration weight");
  cmd->add_option("--lambda-gamma", o.lambda_gamma, "draft cost ratio, or auto");
  cmd->add_option("--max-new-tokens", o.max_new_tokens, "tokens generated per prompt");
  cmd->add_option("--prompts", o.prompts, "prompt file or synthetic:SEED:COUNT:LEN");
  cmd->add_option("--reps", o.reps, "repetitions per prompt");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output path (stdout if omitted)");
  cmd->add_option("--format", o.format, "csv, json or plotdata");
  cmd->add_flag("--no-timing", o.no_timing, "zero all timing columns");
  cmd->add_option("--experiment-id", o.experiment_id, "label written to every row");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speculative decoding benchmark"};
  app.require_subcommand(1);
  Options o;

  CLI::App* run = app.add_subcommand("run", "run one or more strategies");
  add_run_flags(run, o);
  run->add_option("--strategy", o.strategies, "seq:N, tree:W,... or bandit:A;B;...");

  CLI::App* sweep = app.add_subcommand("sweep", "run a fixed tree for each config");
  add_run_flags(sweep, o);
  sweep->add_option("--configs", o.configs, "semicolon-separated tree configs")->required();

  CLI::App* compare = app.add_subcommand("compare", "fixed tree against the bandit");
  add_run_flags(compare, o);
  compare->add_option("--fixed", o.fixed, "fixed tree config");
  compare->add_option("--arms", o.arms, "semicolon-separated bandit arms");

  CLI::App* report = app.add_subcommand("report", "re-render a JSON result");
  report->add_option("--in", o.in, "JSON result file")->required();
  report->add_option("--out", o.out, "output path (stdout if omitted)");
  report->add_option("--format", o.format, "csv, json or plotdata");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (report->parsed()) {
      std::ifstream in(o.in);
      if (!in) fail(ErrorKind::kInvalidConfig, "cannot open " + o.in);
      std::ostringstream text;
      text << in.rdbuf();
      write_output(parse_result_json(text.str()), o);
      return 0;
    }

    if (run->parsed() && o.strategies.empty()) o.strategies.push_back("seq:5");
    ExperimentSpec spec = build_spec(o);
    parse_report_format(o.format);
    load_models(spec, o);

    if (sweep->parsed()) {
      const std::vector<TreeConfig> configs = parse_config_list(o.configs);
      return finish(sweep_tree_configs(spec, configs), o);
    }
    if (compare->parsed()) {
      BanditStrategy bandit;
      bandit.arms = parse_config_list(o.arms);
      const Strategy arms = with_bandit_params(bandit, o);
      return finish(compare_fixed_vs_bandit(spec, TreeConfig::parse(o.fixed),
                                            std::get<BanditStrategy>(arms)),
                    o);
    }
    return finish(run_experiment(spec), o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
