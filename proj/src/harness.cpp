#include "icrl/harness.hpp"

#include "icrl/crl_solver.hpp"
#include "icrl/matrix_io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#ifndef ICRL_ENV_DIR
#define ICRL_ENV_DIR "envs"
#endif

namespace icrl {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (layout.empty() && (setting < 1 || setting > 4)) fail("setting must be 1..4");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
  if (!(target_eps >= 0.0)) fail("target_eps must be >= 0");
  if (!(budget_eps >= 0.0)) fail("budget_eps must be >= 0");
  if (n_e < 1) fail("n_e must be >= 1");
  if (n_max < 1) fail("n_max must be >= 1");
  if (k_max < 0) fail("k_max must be >= 0");
  if (!(c_max > 0.0) || !(r_max > 0.0)) fail("c_max and r_max must be positive");
  if (!(adv_floor > 0.0)) fail("adv_floor must be positive");
}

std::string setting_layout_path(int setting) {
  if (setting < 1 || setting > 4) throw std::invalid_argument("setting must be 1..4");
  return std::string(ICRL_ENV_DIR) + "/setting" + std::to_string(setting) + ".txt";
}

std::string ExperimentConfig::layout_path() const {
  return layout.empty() ? setting_layout_path(setting) : layout;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view text, const std::string& where) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(where + ": bad number '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& where) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument(where + ": expected true or false");
}

std::string shortest(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument(where + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));

    if (key == "layout") {
      cfg.layout = std::string(value);
    } else if (key == "setting") {
      cfg.setting = parse_number<int>(value, where);
    } else if (key == "strategy") {
      const auto kind = parse_strategy(value);
      if (!kind) throw std::invalid_argument(where + ": unknown strategy '" + std::string(value) + "'");
      cfg.strategy = *kind;
    } else if (key == "gamma") {
      cfg.gamma = parse_number<double>(value, where);
    } else if (key == "delta") {
      cfg.delta = parse_number<double>(value, where);
    } else if (key == "target_eps") {
      cfg.target_eps = parse_number<double>(value, where);
    } else if (key == "budget_eps") {
      cfg.budget_eps = parse_number<double>(value, where);
    } else if (key == "n_e") {
      cfg.n_e = parse_number<int>(value, where);
    } else if (key == "n_max") {
      cfg.n_max = parse_number<int>(value, where);
    } else if (key == "k_max") {
      cfg.k_max = parse_number<int>(value, where);
    } else if (key == "seeds") {
      cfg.seeds.clear();
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        cfg.seeds.push_back(parse_number<std::uint64_t>(trim(rest.substr(0, comma)), where));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      if (cfg.seeds.empty()) throw std::invalid_argument(where + ": empty seed list");
    } else if (key == "c_max") {
      cfg.c_max = parse_number<double>(value, where);
    } else if (key == "r_max") {
      cfg.r_max = parse_number<double>(value, where);
    } else if (key == "adv_floor") {
      cfg.adv_floor = parse_number<double>(value, where);
    } else if (key == "output") {
      cfg.output = std::string(value);
    } else if (key == "evaluate_metrics") {
      cfg.evaluate_metrics = parse_bool(value, where);
    } else if (key == "wgiou_variant") {
      if (value == "hadamard") {
        cfg.wgiou_variant = WgiouVariant::hadamard;
      } else if (value == "scalar") {
        cfg.wgiou_variant = WgiouVariant::scalar;
      } else {
        throw std::invalid_argument(where + ": wgiou_variant must be hadamard or scalar");
      }
    } else {
      throw std::invalid_argument(where + ": unknown key '" + std::string(key) + "'");
    }
  }
  return cfg;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  if (!c.layout.empty()) {
    out << "layout = " << c.layout << '\n';
  } else {
    out << "setting = " << c.setting << '\n';
  }
  out << "strategy = " << strategy_name(c.strategy) << '\n'
      << "gamma = " << shortest(c.gamma) << '\n'
      << "delta = " << shortest(c.delta) << '\n'
      << "target_eps = " << shortest(c.target_eps) << '\n'
      << "budget_eps = " << shortest(c.budget_eps) << '\n'
      << "n_e = " << c.n_e << '\n'
      << "n_max = " << c.n_max << '\n'
      << "k_max = " << c.k_max << '\n'
      << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << '\n'
      << "c_max = " << shortest(c.c_max) << '\n'
      << "r_max = " << shortest(c.r_max) << '\n'
      << "adv_floor = " << shortest(c.adv_floor) << '\n'
      << "output = " << c.output << '\n'
      << "evaluate_metrics = " << (c.evaluate_metrics ? "true" : "false") << '\n'
      << "wgiou_variant = " << (c.wgiou_variant == WgiouVariant::hadamard ? "hadamard" : "scalar")
      << '\n';
  return out.str();
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  ExperimentConfig cfg = parse_config(read_text_file(path), base);
  if (!cfg.layout.empty() && fs::path(cfg.layout).is_relative()) {
    cfg.layout = (fs::path(path).parent_path() / cfg.layout).string();
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment loop

namespace {

struct Estimates {
  EstimatedProblem est;
  CostEstimate cost;
};

Estimates estimate(const CountTable& counts, const ExperimentConfig& cfg, const Matrix& reward,
                   int k) {
  Estimates e;
  e.est = empirical_models(counts, cfg.delta, k);
  const Matrix adv = expert_advantage(e.est, reward, cfg.gamma);
  e.cost.sigma = sigma_constant(cfg.r_max, cfg.c_max, cfg.gamma, advantage_scale(adv, cfg.adv_floor));
  e.cost.width = confidence_width(counts, cfg.delta, e.cost.sigma, cfg.c_max);
  e.cost.c_hat =
      recover_cost_from_advantage(e.est, adv, cfg.gamma, cfg.c_max, ConstraintMode::hard);
  return e;
}

// Optimal safe policy of M_hat with c_hat; the least-cost policy if none is safe.
Policy evaluation_policy(const Cmdp& truth, const Estimates& e) {
  const Cmdp model = estimated_cmdp(truth, e.est, e.cost.c_hat);
  try {
    return solve_cmdp(model).policy;
  } catch (const InfeasibleError&) {
    return value_iteration(e.est.p_hat, -e.cost.c_hat, truth.gamma()).policy();
  }
}

}  // namespace

RunLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                      const IterationObserver& observer) {
  cfg.validate();
  const GridLayout layout = load_layout(cfg.layout_path());
  const Gridworld world = make_gridworld(layout, cfg.gamma, cfg.r_max, cfg.c_max);
  const Cmdp& truth = world.cmdp;
  const int S = truth.n_states();
  const int A = truth.n_actions();

  const SafeSolution expert_solution = solve_cmdp(truth);
  const ExpertOracle expert{expert_solution.policy, expert_solution.dead};
  const GenerativeModel generative(truth, expert,
                                   cfg.strategy == StrategyKind::uniform_generative);

  Rng env_rng = Rng::substream(seed, "env");
  Rng strategy_rng = Rng::substream(seed, "strategy");
  Rng expert_rng = Rng::substream(seed, "expert");

  CountTable counts(S, A);
  StrategyState state = StrategyState::initial(cfg.strategy, cfg.gamma);
  const int steps = std::min(layout.horizon, cfg.n_max);

  RunLog log;
  log.strategy = std::string(strategy_name(cfg.strategy));
  log.seed = seed;

  Estimates current = estimate(counts, cfg, truth.reward(), 0);

  // Next exploration policy and the accuracy that goes with it.
  auto plan = [&](const Estimates& e) {
    const Matrix& width = e.cost.width;
    switch (cfg.strategy) {
      case StrategyKind::bear:
        state.last_policy = bear_policy(width, e.est, cfg.gamma);
        return bear_accuracy(width, cfg.gamma);
      case StrategyKind::pcse: {
        state.r_hat = std::min(state.r_hat, r_hat_surrogate(counts, cfg.delta, cfg.r_max, cfg.gamma));
        const PcseProblem problem{width,      e.est,          e.cost.c_hat, truth.reward(),
                                  truth.mu0(), cfg.gamma,     state.eps_k,  cfg.budget_eps,
                                  state.r_hat, cfg.r_max,     cfg.c_max};
        PcseResult res = pcse_policy(problem, state.lambda1, state.lambda2);
        if (res.diagnostics.fallback) ++log.pcse_fallbacks;
        state.last_policy = std::move(res.policy);
        return pcse_accuracy(width, e.est, *state.last_policy, cfg.gamma);
      }
      default:
        return bear_accuracy(width, cfg.gamma);
    }
  };

  const bool has_true_cost = world.true_cost.maxCoeff() > 0.0;
  double running_reward = 0.0;
  double running_cost = 0.0;
  auto record = [&](const Estimates& e) {
    MetricRow row;
    row.k = state.k;
    row.samples = counts.total_samples();
    row.eps_k = state.eps_k;
    if (cfg.evaluate_metrics) {
      const Policy pol = evaluation_policy(truth, e);
      row.disc_reward = truth.mu0().dot(policy_evaluation(truth, truth.reward(), pol).v);
      row.disc_cost = truth.mu0().dot(policy_evaluation(truth, world.true_cost, pol).v);
      // Undefined on layouts without constrained cells.
      row.wgiou = has_true_cost ? wgiou(e.cost.c_hat, world.true_cost, cfg.wgiou_variant)
                                : std::numeric_limits<double>::quiet_NaN();
      running_reward = running_score(running_reward, row.disc_reward);
      running_cost = running_score(running_cost, row.disc_cost);
      row.running_reward = running_reward;
      row.running_cost = running_cost;
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.disc_reward = row.disc_cost = row.wgiou = row.running_reward = row.running_cost = nan;
    }
    log.rows.push_back(row);
    log.costs.push_back(e.cost.c_hat);
  };

  plan(current);
  state.eps_k = 1.0 / (1.0 - cfg.gamma);
  record(current);

  const EpisodeStreams streams{env_rng, strategy_rng, expert_rng};
  while (state.eps_k > cfg.target_eps && state.k < cfg.k_max) {
    counts.begin_iteration();
    const std::optional<Policy> executed = state.last_policy;
    Matrix bear_q;
    if (cfg.strategy == StrategyKind::eps_greedy) {
      bear_q = value_iteration(current.est.p_hat, current.cost.width, cfg.gamma).q;
    }
    for (int episode = 0; episode < cfg.n_e; ++episode) {
      std::vector<Transition> transitions;
      std::vector<ExpertObservation> expert_obs;
      if (is_policy_level(cfg.strategy)) {
        const EpisodeRecord rec = run_episode(truth, *executed, steps, streams, expert);
        transitions = rec.transitions();
        expert_obs = rec.expert_queries;
      } else if (is_action_level(cfg.strategy)) {
        CountMatrix live = counts.cum_sa();
        const int iteration = state.k + 1;
        auto select = [&](int s, int) {
          const int a =
              baseline_action(cfg.strategy, s, live, iteration, strategy_rng, &bear_q);
          ++live(s, a);
          return a;
        };
        const EpisodeRecord rec = run_episode(truth, select, steps, streams, expert);
        transitions = rec.transitions();
        expert_obs = rec.expert_queries;
      } else {
        GenerativeBatch batch = uniform_generative_round(generative, cfg.n_max, env_rng, expert_rng);
        transitions = std::move(batch.transitions);
        expert_obs = std::move(batch.expert_obs);
      }
      for (const auto& t : transitions) counts.add_transition(t);
      for (const auto& o : expert_obs) counts.add_expert(o);
      log.episode_lengths.push_back(static_cast<int>(transitions.size()));
    }

    ++state.k;
    current = estimate(counts, cfg, truth.reward(), state.k);
    state.eps_k = plan(current);
    if (observer) {
      observer(IterationView{state.k, counts, current.est, current.cost,
                             executed ? &*executed : nullptr});
    }
    record(current);
  }

  log.converged = state.eps_k <= cfg.target_eps;
  log.final_cost = current.cost.c_hat;
  log.final_width = current.cost.width;
  log.total_samples = counts.total_samples();
  log.pac = pac_report(world.true_cost, current.cost.c_hat, truth, current.est, cfg.target_eps);
  return log;
}

// ---------------------------------------------------------------------------
// Artifacts

std::string metrics_csv(const RunLog& log) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const MetricRow& row : log.rows) {
    out += format_metric_row(row, log.strategy, log.seed);
    out += '\n';
  }
  return out;
}

std::string pac_text(const RunLog& log) {
  std::ostringstream out;
  out << "completeness=" << format_double(log.pac.completeness) << '\n'
      << "accuracy=" << format_double(log.pac.accuracy) << '\n'
      << "satisfied=" << (log.pac.satisfied ? "true" : "false") << '\n'
      << "converged=" << (log.converged ? "true" : "false") << '\n'
      << "iterations=" << (log.rows.empty() ? 0 : log.rows.back().k) << '\n'
      << "total_samples=" << log.total_samples << '\n'
      << "pcse_fallbacks=" << log.pcse_fallbacks << '\n';
  return out.str();
}

void write_run(const std::string& dir, const ExperimentConfig& config, const RunLog& log,
               bool export_costs) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());

  ExperimentConfig resolved = config;
  resolved.layout = "layout.txt";
  resolved.seeds = {log.seed};
  resolved.output = ".";
  if (auto kind = parse_strategy(log.strategy)) resolved.strategy = *kind;
  const fs::path root(dir);
  write_text_file((root / "layout.txt").string(),
                  serialize_layout(load_layout(config.layout_path())));
  write_text_file((root / "config.txt").string(), serialize_config(resolved));
  write_text_file((root / "metrics.csv").string(), metrics_csv(log));
  write_matrix_csv((root / "cost_final.csv").string(), log.final_cost);
  write_text_file((root / "pac.txt").string(), pac_text(log));
  if (export_costs) {
    fs::create_directories(root / "costs", ec);
    if (ec) throw std::runtime_error("cannot create costs directory: " + ec.message());
    for (std::size_t i = 0; i < log.costs.size(); ++i) {
      write_matrix_csv((root / "costs" / ("cost_" + std::to_string(log.rows[i].k) + ".csv")).string(),
                       log.costs[i]);
    }
  }
}

EvalResult eval_run(const std::string& dir) {
  const fs::path root(dir);
  const ExperimentConfig cfg = load_config((root / "config.txt").string());
  if (cfg.seeds.empty()) throw std::invalid_argument("config.txt has no seed");
  EvalResult res;
  res.expected = read_text_file((root / "metrics.csv").string());
  res.actual = metrics_csv(run_experiment(cfg, cfg.seeds.front()));
  res.identical = res.expected == res.actual;
  return res;
}

std::vector<SweepItem> plan_sweep(const ExperimentConfig& config,
                                  const std::vector<StrategyKind>& strategies) {
  std::vector<SweepItem> plan;
  for (StrategyKind kind : strategies) {
    for (std::uint64_t seed : config.seeds) {
      const fs::path dir =
          fs::path(config.output) / std::string(strategy_name(kind)) / ("seed_" + std::to_string(seed));
      plan.push_back(SweepItem{kind, seed, dir.string()});
    }
  }
  return plan;
}

std::vector<std::string> run_sweep(const ExperimentConfig& config,
                                   const std::vector<SweepItem>& plan, int threads) {
  config.validate();
  std::vector<std::string> errors(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      try {
        ExperimentConfig cfg = config;
        cfg.strategy = plan[i].strategy;
        write_run(plan[i].dir, cfg, run_experiment(cfg, plan[i].seed));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(plan.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return errors;
}

}  // namespace icrl
