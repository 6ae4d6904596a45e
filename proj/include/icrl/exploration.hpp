#pragma once

#include "icrl/cmdp.hpp"
#include "icrl/envs.hpp"
#include "icrl/estimation.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace icrl {

enum class StrategyKind { bear, pcse, random, eps_greedy, max_entropy, ucb, uniform_generative };

inline constexpr StrategyKind kAllStrategies[] = {
    StrategyKind::bear,        StrategyKind::pcse, StrategyKind::random,
    StrategyKind::eps_greedy,  StrategyKind::max_entropy,
    StrategyKind::ucb,         StrategyKind::uniform_generative};

/// CLI name: bear, pcse, random, eps-greedy, max-entropy, ucb, uniform.
std::string_view strategy_name(StrategyKind kind);
std::optional<StrategyKind> parse_strategy(std::string_view name);
bool is_policy_level(StrategyKind kind);
bool is_action_level(StrategyKind kind);

struct StrategyState {
  StrategyKind kind = StrategyKind::bear;
  int k = 0;
  double eps_k = 0.0;
  std::optional<Policy> last_policy;
  double lambda1 = 0.0;  ///< cost multiplier (pcse)
  double lambda2 = 0.0;  ///< reward multiplier (pcse)
  double r_hat = 0.0;    ///< running minimum of the reward margin (pcse)
  std::string rng_stream = "strategy";

  /// k = 0, eps_0 = 1 / (1 - gamma), r_hat = +inf.
  static StrategyState initial(StrategyKind kind, double gamma);
};

/// Greedy policy of the MDP (P_hat, C_k); lowest-index ties.
Policy bear_policy(const Matrix& width, const EstimatedProblem& est, double gamma);
/// max C_k / (1 - gamma)
double bear_accuracy(const Matrix& width, double gamma);

struct PcseCandidateSpec {
  double cost_cap = 0.0;
  double reward_floor = 0.0;
  double r_hat_k = 0.0;
};

struct PcseDiagnostics {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double cost_violation = 0.0;    ///< <rho, c_hat> - cost_cap of the returned policy
  double reward_violation = 0.0;  ///< reward_floor - <rho, r> of the returned policy
  int dual_iterations = 0;
  bool fallback = false;
  std::string fallback_reason;
  PcseCandidateSpec spec;
};

struct PcseOptions {
  double step0 = 1.0;
  int max_steps = 500;
  double tolerance = 1e-4;
};

struct PcseResult {
  Policy policy;
  PcseDiagnostics diagnostics;
};

/// Inputs shared by the candidate-set construction and the dual loop.
struct PcseProblem {
  const Matrix& width;
  const EstimatedProblem& est;
  const Matrix& c_hat;
  const Matrix& reward;
  const Vector& mu0;
  double gamma;
  double eps_k;
  double budget_eps;
  double r_hat;
  double r_max = 1.0;
  double c_max = 1.0;
};

/**
 * Cost cap (1-gamma)(mu0' V^{c,*} + 4 eps_k + 2 eps) and reward floor
 * (1-gamma)(mu0' V^{r,*} + r_hat) from the optimal safe policy of
 * M_hat with c_hat. Throws InfeasibleError when that problem has no solution.
 */
PcseCandidateSpec pcse_candidate_spec(const PcseProblem& problem);

/**
 * Maximises <rho, C_k> over occupancies of (P_hat, mu0) subject to
 * <rho, c_hat> <= cost_cap and <rho, r> >= reward_floor, by dual ascent with an
 * exact best response per step. `lambda` is read as the starting point and
 * receives the final multipliers. Falls back to bear_policy when no best
 * response is feasible.
 */
PcseResult pcse_policy(const PcseProblem& problem, double& lambda1, double& lambda2,
                       const PcseOptions& options = {});

/// Dual loop against a given candidate spec (no cheap emptiness pre-check).
PcseResult pcse_dual_ascent(const PcseProblem& problem, const PcseCandidateSpec& spec,
                            double& lambda1, double& lambda2, const PcseOptions& options = {});

/// max_s [pi Q](s) with Q the evaluation of C_k under `policy` in P_hat.
double pcse_accuracy(const Matrix& width, const EstimatedProblem& est, const Policy& policy,
                     double gamma);

/// 2 gamma R_max/(1-gamma)^2 beta_P + gamma R_max/(1-gamma)^2 beta_pi, both betas clamped at 2.
double r_hat_surrogate(const CountTable& counts, double delta, double r_max, double gamma);

/// min{1, 1/sqrt(k)}; k counts iterations from 1.
double eps_greedy_probability(int k);

/**
 * One action of an action-level baseline at state s.
 *
 * `n_sa` holds the visit counts N(s,a) up to this step. `bear_q` supplies the
 * exploitation arm of eps_greedy and is ignored otherwise.
 */
int baseline_action(StrategyKind kind, int s, const CountMatrix& n_sa, int k, Rng& rng,
                    const Matrix* bear_q = nullptr);

struct GenerativeBatch {
  std::vector<Transition> transitions;
  std::vector<ExpertObservation> expert_obs;
  std::vector<int> absent_queries;
};

/// ceil(n_max / (S A)) draws per pair, pairs in index order, then one expert query per state.
GenerativeBatch uniform_generative_round(const GenerativeModel& model, int n_max, Rng& env_rng,
                                         Rng& expert_rng);

}  // namespace icrl
