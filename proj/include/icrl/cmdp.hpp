#pragma once

#include "icrl/types.hpp"

#include <optional>
#include <vector>

namespace icrl {

class Rng;

/**
 * Tabular constrained MDP (S, A, P, r, c, budget, mu0, gamma).
 *
 * The transition kernel is an (S*A) x S matrix. A model built with
 * `Cmdp::estimated` may carry substochastic rows (all-zero rows for
 * unvisited pairs); every solver in this library accepts those as-is.
 */
class Cmdp {
 public:
  Cmdp(Matrix transition, Matrix reward, Matrix cost, double budget, Vector mu0, double gamma,
       double r_max, double c_max);

  /// Same as the constructor, but transition rows may sum to anything in [0, 1].
  static Cmdp estimated(Matrix transition, Matrix reward, Matrix cost, double budget, Vector mu0,
                        double gamma, double r_max, double c_max);

  int n_states() const { return static_cast<int>(reward_.rows()); }
  int n_actions() const { return static_cast<int>(reward_.cols()); }
  const Matrix& transition() const { return transition_; }
  const Matrix& reward() const { return reward_; }
  const Matrix& cost() const { return cost_; }
  double budget() const { return budget_; }
  const Vector& mu0() const { return mu0_; }
  double gamma() const { return gamma_; }
  double r_max() const { return r_max_; }
  double c_max() const { return c_max_; }
  bool substochastic() const { return substochastic_; }

  double p(int s, int a, int next) const {
    return transition_(sa_index(s, a, n_actions()), next);
  }

  /// Copy of this model with a different cost matrix (range is not re-checked against C_max).
  Cmdp with_cost(Matrix cost) const;

 private:
  Cmdp(Matrix transition, Matrix reward, Matrix cost, double budget, Vector mu0, double gamma,
       double r_max, double c_max, bool substochastic);

  Matrix transition_;
  Matrix reward_;
  Matrix cost_;
  double budget_;
  Vector mu0_;
  double gamma_;
  double r_max_;
  double c_max_;
  bool substochastic_;
};

/// Row-stochastic state -> action distribution.
class Policy {
 public:
  explicit Policy(Matrix probs);

  static Policy uniform(int n_states, int n_actions);
  static Policy deterministic(const std::vector<int>& actions, int n_actions);

  const Matrix& probs() const { return probs_; }
  int n_states() const { return static_cast<int>(probs_.rows()); }
  int n_actions() const { return static_cast<int>(probs_.cols()); }
  double operator()(int s, int a) const { return probs_(s, a); }

  bool is_deterministic() const;
  /// Action of a one-hot row; throws when the row is not one-hot.
  int action(int s) const;
  int sample(int s, Rng& rng) const;

  bool operator==(const Policy& other) const { return probs_ == other.probs_; }

 private:
  Matrix probs_;
};

/// Q, V and the advantage Q - V for one policy and one signal.
struct ValuePair {
  Vector v;
  Matrix q;
  Matrix adv;
};

struct OccupancyMeasure {
  Matrix rho;
};

enum class LinearSolver { automatic, direct, iterative };

/// Largest S*A handled by dense factorisation under LinearSolver::automatic.
inline constexpr Eigen::Index kDirectSolveLimit = 4096;

/// State-to-state kernel P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
Matrix state_kernel(const Matrix& transition, const Matrix& policy);

/**
 * Solves Q = g + gamma * P * (pi Q) for a fixed policy.
 *
 * `policy` rows may sum to less than one (estimated expert policies with
 * unvisited states); such states get V = sum_a pi Q = 0.
 */
ValuePair policy_evaluation(const Matrix& transition, const Matrix& signal, const Matrix& policy,
                            double gamma, LinearSolver solver = LinearSolver::automatic);
ValuePair policy_evaluation(const Cmdp& cmdp, const Matrix& signal, const Policy& policy);

/// max |Q - g - gamma P pi Q| over all pairs.
double bellman_evaluation_residual(const Matrix& transition, const Matrix& signal,
                                   const Matrix& policy, double gamma, const Matrix& q);

struct OptimalValues {
  Vector v;
  Matrix q;
  std::vector<int> greedy;
  std::vector<bool> dead;  ///< states where every action is masked
  double residual = 0.0;   ///< Bellman optimality residual over live states
  Policy policy() const;
};

/**
 * Optimal values of a discounted MDP with gain `signal`, maximising.
 *
 * Internally runs Howard policy iteration with exact evaluation, so the
 * result is the fixed point up to linear-solve round-off. Masked pairs are
 * ignored; a state with every action masked is reported dead, gets V = 0
 * and the fallback action 0. Ties go to the lowest action index.
 */
OptimalValues value_iteration(const Matrix& transition, const Matrix& signal, double gamma,
                              const ActionMask* mask = nullptr,
                              LinearSolver solver = LinearSolver::automatic);

OccupancyMeasure occupancy_of_policy(const Matrix& transition, const Vector& mu0,
                                     const Matrix& policy, double gamma);
OccupancyMeasure occupancy_of_policy(const Cmdp& cmdp, const Policy& policy);

/// max_s | sum_a rho(s,a) - (1-gamma) mu0(s) - gamma sum_{s',a'} P(s|s',a') rho(s',a') |
double bellman_flow_residual(const Matrix& rho, const Matrix& transition, const Vector& mu0,
                             double gamma);
double bellman_flow_residual(const Matrix& rho, const Cmdp& cmdp);

/// pi(a|s) = rho(s,a) / sum_a rho(s,a); zero-mass rows become uniform.
Policy policy_extraction(const Matrix& rho);

/// <x, y> summed over all entries.
inline double frobenius(const Matrix& x, const Matrix& y) { return (x.array() * y.array()).sum(); }

}  // namespace icrl
