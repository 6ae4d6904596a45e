// Command-line front end: run, sweep, eval, export-env.

#include "icrl/harness.hpp"
#include "icrl/matrix_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

namespace {

using namespace icrl;

constexpr int kUsageError = 2;
constexpr int kIoError = 1;
constexpr int kMismatch = 3;

struct CommonFlags {
  std::string config;
  std::optional<int> setting;
  std::string layout;
  std::optional<int> k_max;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--setting", f.setting, "shipped gridworld 1..4")->check(CLI::Range(1, 4));
  cmd->add_option("--layout", f.layout, "layout file (overrides --setting)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--k-max", f.k_max, "iteration cap")->check(CLI::NonNegativeNumber);
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.setting) {
    cfg.setting = *f.setting;
    cfg.layout.clear();
  }
  if (!f.layout.empty()) cfg.layout = f.layout;
  if (f.k_max) cfg.k_max = *f.k_max;
  return cfg;
}

CLI::Validator strategy_validator() {
  return CLI::Validator(
      [](std::string& name) -> std::string {
        return parse_strategy(name) ? std::string() : "unknown strategy '" + name + "'";
      },
      "bear|pcse|random|eps-greedy|max-entropy|ucb|uniform", "STRATEGY");
}

int export_env(const ExperimentConfig& cfg, const std::string& out) {
  const Gridworld world =
      make_gridworld(load_layout(cfg.layout_path()), cfg.gamma, cfg.r_max, cfg.c_max);
  for (const auto& w : world.warnings) std::cerr << "warning: " << w << '\n';
  std::filesystem::create_directories(out);
  const std::filesystem::path root(out);
  write_text_file((root / "layout.txt").string(), serialize_layout(world.layout));
  write_matrix_csv((root / "transition.csv").string(), world.cmdp.transition());
  write_matrix_csv((root / "reward.csv").string(), world.cmdp.reward());
  write_matrix_csv((root / "cost.csv").string(), world.cmdp.cost());
  write_matrix_csv((root / "mu0.csv").string(), world.cmdp.mu0());
  std::cout << "wrote " << out << " (S=" << world.cmdp.n_states()
            << ", A=" << world.cmdp.n_actions() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strategic exploration for inverse constrained RL on tabular gridworlds"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string run_strategy;
  std::optional<std::uint64_t> run_seed;
  std::string run_out = "out/run";
  bool export_costs = false;
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, run_flags);
  run->add_option("--strategy", run_strategy, "exploration strategy")->check(strategy_validator());
  run->add_option("--seed", run_seed, "root seed");
  run->add_option("--out", run_out, "run directory");
  run->add_flag("--export-costs", export_costs, "also write c_hat for every iteration");

  CommonFlags sweep_flags;
  std::vector<std::string> sweep_strategies;
  std::vector<std::uint64_t> sweep_seeds;
  std::string sweep_out;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "all strategies x seeds");
  add_common(sweep, sweep_flags);
  sweep->add_option("--strategy", sweep_strategies, "restrict to these strategies")
      ->check(strategy_validator());
  sweep->add_option("--seed", sweep_seeds, "seeds (default: 123456 123 1234 36 34)");
  sweep->add_option("--out", sweep_out, "output root");
  sweep->add_option("--threads", threads, "parallel runs")->check(CLI::PositiveNumber);

  std::string eval_dir;
  auto* eval = app.add_subcommand("eval", "re-run a saved run and compare metrics.csv");
  eval->add_option("--out,dir", eval_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  CommonFlags env_flags;
  std::string env_out = "out/env";
  auto* env = app.add_subcommand("export-env", "write layout and model matrices as CSV");
  add_common(env, env_flags);
  env->add_option("--out", env_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*run) {
      ExperimentConfig cfg = resolve(run_flags);
      if (!run_strategy.empty()) cfg.strategy = *parse_strategy(run_strategy);
      const std::uint64_t seed = run_seed ? *run_seed : cfg.seeds.front();
      const RunLog log = run_experiment(cfg, seed);
      write_run(run_out, cfg, log, export_costs);
      const MetricRow& last = log.rows.back();
      std::cout << log.strategy << " seed=" << seed << " k=" << last.k
                << " samples=" << last.samples << " eps=" << format_double(last.eps_k)
                << (log.converged ? " converged" : " not converged") << " -> " << run_out << '\n';
      return 0;
    }
    if (*sweep) {
      ExperimentConfig cfg = resolve(sweep_flags);
      if (!sweep_seeds.empty()) cfg.seeds = sweep_seeds;
      if (!sweep_out.empty()) cfg.output = sweep_out;
      std::vector<StrategyKind> kinds;
      for (const auto& name : sweep_strategies) kinds.push_back(*parse_strategy(name));
      if (kinds.empty()) kinds.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
      const auto plan = plan_sweep(cfg, kinds);
      const auto errors = run_sweep(cfg, plan, threads);
      int failed = 0;
      for (std::size_t i = 0; i < plan.size(); ++i) {
        if (errors[i].empty()) {
          std::cout << "ok   " << plan[i].dir << '\n';
        } else {
          ++failed;
          std::cerr << "FAIL " << plan[i].dir << ": " << errors[i] << '\n';
        }
      }
      return failed == 0 ? 0 : kIoError;
    }
    if (*eval) {
      const EvalResult res = eval_run(eval_dir);
      std::cout << (res.identical ? "identical" : "metrics differ") << '\n';
      return res.identical ? 0 : kMismatch;
    }
    if (*env) {
      return export_env(resolve(env_flags), env_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return 0;
}
