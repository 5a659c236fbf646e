// lmpc: command-line driver for chain evaluation, MPC runs and the batch
// experiments. Exit status: 0 all checks passed, 1 a check failed, 2 bad
// configuration.

#include <chrono>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmpc/lmpc.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_check_failed = 1;
constexpr int exit_config = 2;

struct Globals {
  std::string params;
  std::string seed;
  std::string out;
  std::uint64_t trials = 1000;
  unsigned jobs = 1;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw lmpc::Error(lmpc::ErrorKind::config, "cannot write '" + path + "'");
  f << text;
}

/// Writes to --out when given, stdout otherwise.
void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    write_file(g.out, text);
  }
}

lmpc::Config load_config(const Globals& g) {
  if (g.params.empty()) throw lmpc::Error(lmpc::ErrorKind::config, "--params is required");
  return lmpc::Config::load(g.params);
}

lmpc::Seed master_seed(const Globals& g, const lmpc::Config& cfg) {
  if (!g.seed.empty()) return lmpc::Seed::from_hex(g.seed);
  if (cfg.has("seed")) return lmpc::Seed::from_hex(cfg.get("seed"));
  throw lmpc::Error(lmpc::ErrorKind::config, "a seed is required (--seed or config key 'seed')");
}

lmpc::InputVector load_input(const std::string& spec, const lmpc::Parameters& p, const lmpc::Seed& seed) {
  if (spec.empty() || spec == "random") return lmpc::random_input(p, seed);
  std::ifstream f(spec, std::ios::binary);
  if (!f) throw lmpc::Error(lmpc::ErrorKind::config, "cannot read input '" + spec + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (lmpc::is_input_file(bytes)) return lmpc::parse_input_file(bytes, p);
  const std::string text(bytes.begin(), bytes.end());
  return lmpc::parse_input(lmpc::detail::trim(text), p);
}

class Stopwatch {
 public:
  ~Stopwatch() {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
    std::cerr << "elapsed: " << ms.count() << " ms\n";
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int report(const lmpc::ExperimentOutput& result, const Globals& g) {
  emit(g, result.csv);
  std::cerr << result.summary << '\n';
  return result.passed ? exit_ok : exit_check_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line/SimLine chains, an MPC round simulator and compression-argument codecs"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--params", g.params, "key = value parameter file");
  app.add_option("--seed", g.seed, "master seed, 64 hex characters");
  app.add_option("--out", g.out, "output file (default stdout)");
  app.add_option("--trials", g.trials, "trials per experiment row");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);

  std::string func = "line";
  std::string input = "random";
  std::string trace_path;
  auto* eval = app.add_subcommand("eval-ram", "evaluate a chain with the sequential algorithm");
  eval->add_option("--func", func, "line or simline");
  eval->add_option("--input", input, "input file (binary or hex text) or 'random'");
  eval->add_option("--trace", trace_path, "write the node trace as CSV");

  std::string strategy_name;
  std::optional<std::uint64_t> rounds;
  std::string report_path;
  auto* run = app.add_subcommand("run-mpc", "run a strategy in the MPC simulator");
  run->add_option("--strategy", strategy_name, "segment, token, greedy_probe or jump");
  run->add_option("--input", input, "input file (binary or hex text) or 'random'");
  run->add_option("--rounds", rounds, "round limit");
  run->add_option("--report", report_path, "per machine-round CSV");

  auto* sweep = app.add_subcommand("sweep", "round counts over a parameter grid");
  auto* decay = app.add_subcommand("decay", "greedy advance distribution against rho^j");
  auto* jump = app.add_subcommand("jump", "hit rate of blind guesses at chain entries");

  std::string scheme_name;
  std::string csv_path;
  auto* compress = app.add_subcommand("compress-check", "codec roundtrip and length bounds");
  compress->add_option("--scheme", scheme_name, "warmup or enum");
  compress->add_option("--csv", csv_path, "output CSV (same as --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }

  try {
    const Stopwatch clock;
    const lmpc::Config cfg = load_config(g);
    const lmpc::Seed seed = master_seed(g, cfg);

    if (eval->parsed()) {
      const lmpc::ChainKind kind = lmpc::parse_chain_kind(func);
      const lmpc::Parameters p = lmpc::parameters_from(cfg);
      p.validate(kind);
      const lmpc::InputVector x = load_input(input, p, seed);
      lmpc::OracleHandle oracle(seed, p.n, lmpc::parse_oracle_mode(cfg.get_or("oracle_mode", "lazy")));
      const auto result = lmpc::eval_chain(kind, p, oracle, x, !trace_path.empty());
      if (!trace_path.empty()) write_file(trace_path, lmpc::trace_csv(*result.trace, p, kind));
      emit(g, lmpc::word_hex(result.output, p.n) + "\n");
      std::cerr << "queries: " << oracle.query_log().size() << '\n';
      return exit_ok;
    }

    if (run->parsed()) {
      lmpc::Parameters p = lmpc::parameters_from(cfg);
      lmpc::StrategyConfig sc = lmpc::strategy_config_from(cfg);
      if (!strategy_name.empty()) sc.name = strategy_name;
      auto strategy = lmpc::prepare_strategy(sc, p);
      const lmpc::InputVector x = load_input(input, p, seed);
      lmpc::OracleHandle oracle(seed, p.n, lmpc::parse_oracle_mode(cfg.get_or("oracle_mode", "lazy")));
      lmpc::RunOptions options;
      options.max_rounds = rounds.value_or(cfg.get_u64_or("rounds", p.w + 2));
      options.tape_seed = lmpc::tape_seed_for(seed);
      const lmpc::RunReport result = lmpc::run(p, *strategy, x, oracle, options);
      if (!report_path.empty()) write_file(report_path, lmpc::report_csv(result, p));
      std::ostringstream summary;
      summary << "success=" << (result.success ? "true" : "false") << " rounds_used=" << result.rounds_used
              << " ground_truth=" << lmpc::word_hex(result.ground_truth, p.n)
              << " violations=" << result.violations.size() << '\n';
      for (const auto& v : result.violations) {
        summary << "violation " << lmpc::to_string(v.kind) << " round=" << v.round << " machine=" << v.machine << ": "
                << v.detail << '\n';
      }
      emit(g, summary.str());
      return result.clean() ? exit_ok : exit_check_failed;
    }

    if (sweep->parsed()) return report(lmpc::run_sweep(cfg, seed, g.trials, g.jobs), g);
    if (decay->parsed()) return report(lmpc::run_decay(cfg, seed, g.trials, g.jobs), g);
    if (jump->parsed()) return report(lmpc::run_jump(cfg, seed, g.trials, g.jobs), g);

    if (compress->parsed()) {
      if (!csv_path.empty()) g.out = csv_path;
      const std::string name = scheme_name.empty() ? cfg.get_or("scheme", "warmup") : scheme_name;
      return report(lmpc::run_compress(cfg, lmpc::parse_scheme(name), seed, g.trials, g.jobs), g);
    }
  } catch (const lmpc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case lmpc::ErrorKind::decode:
      case lmpc::ErrorKind::injectivity:
        return exit_check_failed;
      default:
        return exit_config;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_check_failed;
  }
  return exit_config;
}
