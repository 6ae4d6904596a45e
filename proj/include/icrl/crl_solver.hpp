#pragma once

#include "icrl/cmdp.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace icrl {

/// Raised when no deterministic policy meets the cost budget.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double min_cost)
      : std::runtime_error(what), min_cost_(min_cost) {}
  /// Smallest attainable mu0^T V^c over deterministic policies.
  double min_cost() const { return min_cost_; }

 private:
  double min_cost_;
};

struct SafeSolution {
  Policy policy;
  Vector v_reward;
  Vector v_cost;
  /// States with no safe action; the policy row there is a placeholder (action 0).
  std::vector<bool> dead;
  /// Dual weight of the soft-constraint solve; empty in hard mode.
  std::optional<double> lambda_star;

  double reward_value(const Vector& mu0) const { return mu0.dot(v_reward); }
  double cost_value(const Vector& mu0) const { return mu0.dot(v_cost); }
  bool is_dead(int s) const { return dead[static_cast<std::size_t>(s)]; }
};

/**
 * Forbidden pairs for a hard constraint: the least fixed point of
 * "c(s,a) > 0, or P(.|s,a) reaches a state whose actions are all forbidden".
 */
ActionMask unsafe_closure(const Matrix& transition, const Matrix& cost);
/// Requires a zero budget.
ActionMask unsafe_closure(const Cmdp& cmdp);

/// States with every action masked.
std::vector<bool> dead_states(const ActionMask& mask);

/**
 * Optimal safe policy of a known-cost CMDP.
 *
 * Budget 0 runs value iteration on the reward restricted to actions outside
 * `unsafe_closure`. A positive budget searches deterministic policies by
 * bisection on a single multiplier over the gain r - lambda*c.
 * Throws InfeasibleError when mu0 cannot be kept within budget.
 */
SafeSolution solve_cmdp(const Cmdp& cmdp);

struct BruteForceResult {
  bool feasible = false;
  double value = 0.0;     ///< best mu0^T V^r among feasible deterministic policies
  double min_cost = 0.0;  ///< smallest mu0^T V^c over all deterministic policies
  std::optional<Policy> policy;
};

/// Exhaustive search over deterministic policies. Needs S <= 6, A <= 4, A^S <= 4096.
BruteForceResult brute_force_cmdp(const Cmdp& cmdp);

/// Cost tolerance for the hard (budget 0) case.
inline constexpr double kHardCostTol = 1e-10;
/// Cost tolerance for the soft case.
inline constexpr double kSoftCostTol = 1e-6;

}  // namespace icrl
