#pragma once

#include "icrl/cmdp.hpp"

#include <optional>
#include <span>
#include <vector>

namespace icrl {

/**
 * Visit counters for one run.
 *
 * `n_sas` holds the current iteration's transitions, `cum_sas` the running
 * total N_k(s,a,s'). The marginals N_k(s,a) and N_k(s) are kept in sync.
 * Expert observations go to a separate table that only expert queries feed.
 */
class CountTable {
 public:
  CountTable(int n_states, int n_actions);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  /// Clears the per-iteration counters n_k.
  void begin_iteration();
  void add_transition(const Transition& t);
  void add_expert(const ExpertObservation& e);

  const CountMatrix& n_sas() const { return n_sas_; }
  const CountMatrix& cum_sas() const { return cum_sas_; }
  const CountMatrix& cum_sa() const { return cum_sa_; }
  const CountVector& cum_s() const { return cum_s_; }
  const CountMatrix& expert_sa() const { return expert_sa_; }

  std::int64_t n(int s, int a, int next) const { return n_sas_(sa_index(s, a, n_actions_), next); }
  std::int64_t N(int s, int a, int next) const {
    return cum_sas_(sa_index(s, a, n_actions_), next);
  }
  std::int64_t N(int s, int a) const { return cum_sa_(s, a); }
  std::int64_t N(int s) const { return cum_s_(s); }
  std::int64_t total_samples() const { return cum_s_.sum(); }

 private:
  void check_pair(int s, int a) const;

  int n_states_;
  int n_actions_;
  CountMatrix n_sas_;
  CountMatrix cum_sas_;
  CountMatrix cum_sa_;
  CountVector cum_s_;
  CountMatrix expert_sa_;
};

/// Adds a batch of observations; throws std::out_of_range on bad indices.
CountTable update_counts(CountTable counts, std::span<const Transition> transitions,
                         std::span<const ExpertObservation> expert_obs);

/// x^+ = max{1, x}
inline double plus(double x) { return x < 1.0 ? 1.0 : x; }

struct EstimatedProblem {
  Matrix p_hat;   ///< (S*A) x S, rows of unvisited pairs are zero
  Matrix pi_hat;  ///< S x A, rows of states without expert data are zero
  int k = 0;
  double delta = 0.1;
};

EstimatedProblem empirical_models(const CountTable& counts, double delta, int k = 0);

struct CostEstimate {
  Matrix c_hat;
  Matrix width;
  double sigma = 0.0;
  double eps_k = 0.0;
};

/// gamma C_max (R_max (3+gamma) / min_adv + (1-gamma)) / (1-gamma)^2
double sigma_constant(double r_max, double c_max, double gamma, double min_pos_adv);

/// Smallest strictly positive |x| over all entries, or nullopt when none.
std::optional<double> min_positive_abs(const Matrix& x);

/// min^+ |adv| with a lower floor; the floor is used when no entry is positive.
double advantage_scale(const Matrix& advantage, double floor);

/// log(36 S A (n^+)^2 / delta), natural log.
double log_term(int n_states, int n_actions, double n, double delta);

/// C_k(s,a) = min{ sigma sqrt(l_k(s,a) / (2 N_k^+(s,a))), C_max }
Matrix confidence_width(const CountTable& counts, double delta, double sigma, double c_max);

enum class ConstraintMode { hard, soft };

/// Advantages below this are not treated as constraint violating.
inline constexpr double kAdvantageTol = 1e-6;

/// Reward advantage of pi_hat in the model p_hat.
Matrix expert_advantage(const EstimatedProblem& est, const Matrix& reward, double gamma);

/**
 * Canonical feasible cost for an (estimated) expert.
 *
 * Hard mode: C_max on pairs the expert never takes whose reward advantage
 * exceeds kAdvantageTol, zero elsewhere (and on states with no expert data).
 * Soft mode adds the shaping term V^c(s) - gamma (P V^c)(s,a); `v_c` is
 * required there and the result is not clamped to [0, C_max].
 */
Matrix recover_cost(const EstimatedProblem& est, const Matrix& reward, double gamma, double c_max,
                    ConstraintMode mode, const std::optional<Vector>& v_c = std::nullopt);
Matrix recover_cost_from_advantage(const EstimatedProblem& est, const Matrix& advantage,
                                   double gamma, double c_max, ConstraintMode mode,
                                   const std::optional<Vector>& v_c = std::nullopt);

enum class PairCase { expert_consistent, constraint_violating, non_critical, excluded };

struct FeasibilityReport {
  Eigen::Array<PairCase, Eigen::Dynamic, Eigen::Dynamic> cases;
  ActionMask satisfied;  ///< per pair; excluded pairs count as satisfied
  Matrix cost_gap;       ///< Q^{c,piE} - V^{c,piE}
  Matrix reward_adv;     ///< A^{r,piE}
  bool verdict = false;
  int violations() const { return static_cast<int>((!satisfied).count()); }
};

/**
 * Checks the three sign conditions of a feasible cost against the true
 * model. States flagged in `dead` are excluded and the expert row there is
 * treated as absent.
 */
FeasibilityReport feasibility_check(const Matrix& cost, const Cmdp& cmdp, const Policy& expert,
                                    const std::vector<bool>& dead, double tol = 1e-8);

/// Expert probabilities with the rows of dead states zeroed.
Matrix expert_rows(const Policy& expert, const std::vector<bool>& dead);

/// gamma |(P - P_hat) V^c| + |A - A_hat| zeta, elementwise.
Matrix error_propagation_bound(const EstimatedProblem& est, const Matrix& true_transition,
                               const Matrix& true_expert, const Matrix& reward, double gamma,
                               const Vector& v_c, const Matrix& zeta);

/// Cost A zeta + (E - gamma P) V^c for a given expert, model and shaping.
Matrix explicit_cost(const Matrix& transition, const Matrix& expert, const Matrix& reward,
                     double gamma, const Vector& v_c, const Matrix& zeta);

struct PseudoCounts {
  Matrix bar_n;
  int horizon = 0;
};

/// Accumulates expected visitation counts of successive policies in a fixed model.
class PseudoCountAccumulator {
 public:
  PseudoCountAccumulator(Matrix transition, Vector mu0, int n_max);

  /// Adds sum_{h=1}^{n_max} eta^h for one policy.
  void add(const Policy& policy);
  const PseudoCounts& counts() const { return counts_; }
  int policies() const { return policies_; }

 private:
  Matrix transition_;
  Vector mu0_;
  PseudoCounts counts_;
  int policies_ = 0;
};

PseudoCounts pseudo_counts(std::span<const Policy> history, const Cmdp& cmdp, int n_max);

/// max{sigma, sqrt(2) C_max} sqrt(2 l_bar / bar_N^+) elementwise.
Matrix pseudo_count_bound(const PseudoCounts& pc, int n_states, int n_actions, double delta,
                          double sigma, double c_max);

struct PacError {
  double completeness = 0.0;
  double accuracy = 0.0;
};

/**
 * Completeness and accuracy errors of a recovered cost: the largest gap
 * between Q^c and Q^{c_hat} in the true model under the optimal safe policy
 * of M with c_true, and under the one of M_hat with c_hat. States dead for
 * the respective solution are skipped.
 */
PacError pac_error(const Matrix& c_true, const Matrix& c_hat, const Cmdp& cmdp,
                   const EstimatedProblem& est);

/// M_hat with cost c_hat (reward, mu0, gamma and budget from the true problem).
Cmdp estimated_cmdp(const Cmdp& truth, const EstimatedProblem& est, const Matrix& c_hat);

}  // namespace icrl
