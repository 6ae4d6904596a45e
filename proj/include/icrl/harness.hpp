#pragma once

#include "icrl/envs.hpp"
#include "icrl/estimation.hpp"
#include "icrl/exploration.hpp"
#include "icrl/metrics.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace icrl {

inline constexpr std::uint64_t kPaperSeeds[] = {123456, 123, 1234, 36, 34};

struct ExperimentConfig {
  std::string layout;  ///< layout file; empty means the shipped `setting`
  int setting = 1;
  StrategyKind strategy = StrategyKind::bear;
  double gamma = 0.95;
  double delta = 0.1;
  double target_eps = 0.5;
  double budget_eps = 0.0;
  int n_e = 1;
  int n_max = 50;
  int k_max = 2000;
  std::vector<std::uint64_t> seeds{std::begin(kPaperSeeds), std::end(kPaperSeeds)};
  double c_max = 1.0;
  double r_max = 1.0;
  double adv_floor = 0.05;
  std::string output = "out";
  /// Solve M_hat with c_hat each iteration for disc_reward, disc_cost and wgiou.
  bool evaluate_metrics = true;
  WgiouVariant wgiou_variant = WgiouVariant::hadamard;

  /// Throws std::invalid_argument on a bad field.
  void validate() const;
  /// `layout` if set, otherwise the shipped file for `setting`.
  std::string layout_path() const;
};

/// Flat `key = value` text with `#` comments; unknown keys are errors.
ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base = {});
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base = {});

/// Shipped layout file for settings 1..4.
std::string setting_layout_path(int setting);

/// Read-only view handed to an observer after each iteration's update.
struct IterationView {
  int k;
  const CountTable& counts;
  const EstimatedProblem& est;
  const CostEstimate& cost;
  /// Policy executed during the iteration that produced these counts (policy-level strategies).
  const Policy* executed_policy;
};

using IterationObserver = std::function<void(const IterationView&)>;

struct RunLog {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
  std::vector<Matrix> costs;  ///< c_hat_k for each row
  Matrix final_cost;
  Matrix final_width;
  PacReport pac;
  bool converged = false;  ///< stopped because eps_k <= target_eps
  int pcse_fallbacks = 0;
  std::vector<int> episode_lengths;
  std::int64_t total_samples = 0;
};

/// The exploration loop. Config and layout errors surface before any episode.
RunLog run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                      const IterationObserver& observer = {});

/// The metrics.csv text for a log.
std::string metrics_csv(const RunLog& log);
/// key=value lines: completeness, accuracy, satisfied, converged, total_samples, pcse_fallbacks.
std::string pac_text(const RunLog& log);

/// Writes config.txt, metrics.csv, cost_final.csv and pac.txt into `dir` (created if needed).
void write_run(const std::string& dir, const ExperimentConfig& config, const RunLog& log,
               bool export_costs = false);

struct EvalResult {
  bool identical = false;
  std::string expected;
  std::string actual;
};

/// Re-runs the experiment described by `dir/config.txt` and compares metrics.csv.
EvalResult eval_run(const std::string& dir);

struct SweepItem {
  StrategyKind strategy;
  std::uint64_t seed;
  std::string dir;
};

/// Every strategy x seed; runs go to `<output>/<strategy>/seed_<n>`.
std::vector<SweepItem> plan_sweep(const ExperimentConfig& config,
                                  const std::vector<StrategyKind>& strategies);
/// Executes the plan on up to `threads` workers. Returns the first error message per failed run.
std::vector<std::string> run_sweep(const ExperimentConfig& config,
                                   const std::vector<SweepItem>& plan, int threads);

}  // namespace icrl
