#include "icrl/crl_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace icrl {

namespace {

struct Evaluated {
  Policy policy;
  double reward;
  double cost;
  ValuePair vr;
  ValuePair vc;
};

Evaluated evaluate(const Cmdp& cmdp, Policy policy) {
  ValuePair vr = policy_evaluation(cmdp, cmdp.reward(), policy);
  ValuePair vc = policy_evaluation(cmdp, cmdp.cost(), policy);
  const double jr = cmdp.mu0().dot(vr.v);
  const double jc = cmdp.mu0().dot(vc.v);
  return Evaluated{std::move(policy), jr, jc, std::move(vr), std::move(vc)};
}

// Smallest mu0^T V^c over deterministic policies.
double min_attainable_cost(const Cmdp& cmdp) {
  const OptimalValues best = value_iteration(cmdp.transition(), -cmdp.cost(), cmdp.gamma());
  return -cmdp.mu0().dot(best.v);
}

// Greedy policy for r - lambda*c; ties on the scalarised value go to the
// action with the lower one-step cost lookahead, then to the lower index.
Evaluated scalarised_policy(const Cmdp& cmdp, double lambda) {
  const Matrix gain = cmdp.reward() - lambda * cmdp.cost();
  const OptimalValues opt = value_iteration(cmdp.transition(), gain, cmdp.gamma());
  const ValuePair vc = policy_evaluation(cmdp, cmdp.cost(), opt.policy());
  std::vector<int> actions = opt.greedy;
  for (int s = 0; s < cmdp.n_states(); ++s) {
    const double best = opt.v(s);
    const double tie = 1e-10 * (1.0 + std::abs(best));
    double best_cost = std::numeric_limits<double>::infinity();
    for (int a = 0; a < cmdp.n_actions(); ++a) {
      if (opt.q(s, a) < best - tie) continue;
      if (vc.q(s, a) < best_cost - 1e-12) {
        best_cost = vc.q(s, a);
        actions[s] = a;
      }
    }
  }
  return evaluate(cmdp, Policy::deterministic(actions, cmdp.n_actions()));
}

SafeSolution to_solution(const Evaluated& e, std::vector<bool> dead, std::optional<double> lambda) {
  return SafeSolution{e.policy, e.vr.v, e.vc.v, std::move(dead), lambda};
}

SafeSolution solve_hard(const Cmdp& cmdp) {
  const ActionMask mask = unsafe_closure(cmdp);
  const OptimalValues opt = value_iteration(cmdp.transition(), cmdp.reward(), cmdp.gamma(), &mask);
  const Evaluated e = evaluate(cmdp, opt.policy());
  if (e.cost > kHardCostTol) {
    std::ostringstream msg;
    const double floor = min_attainable_cost(cmdp);
    msg << "hard constraint infeasible: mu0 places mass on states without a safe action"
        << " (smallest attainable discounted cost " << floor << ")";
    throw InfeasibleError(msg.str(), floor);
  }
  return to_solution(e, opt.dead, std::nullopt);
}

SafeSolution solve_soft(const Cmdp& cmdp) {
  const double budget = cmdp.budget();
  const double floor = min_attainable_cost(cmdp);
  if (floor > budget + kSoftCostTol) {
    std::ostringstream msg;
    msg << "soft constraint infeasible: smallest attainable discounted cost " << floor
        << " exceeds budget " << budget;
    throw InfeasibleError(msg.str(), floor);
  }
  const std::vector<bool> no_dead(static_cast<std::size_t>(cmdp.n_states()), false);
  auto feasible = [&](const Evaluated& e) { return e.cost <= budget + kSoftCostTol; };

  Evaluated unconstrained = scalarised_policy(cmdp, 0.0);
  if (feasible(unconstrained)) return to_solution(unconstrained, no_dead, 0.0);

  double min_positive_cost = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cmdp.cost().size(); ++i) {
    const double c = cmdp.cost().data()[i];
    if (c > 0.0) min_positive_cost = std::min(min_positive_cost, c);
  }
  constexpr double kLambdaCap = 1073741824.0;  // 2^30
  double hi = cmdp.r_max() / ((1.0 - cmdp.gamma()) * min_positive_cost);
  std::optional<Evaluated> best;
  auto consider = [&](Evaluated e) {
    if (feasible(e) && (!best || e.reward > best->reward + 1e-12)) best = std::move(e);
  };

  Evaluated at_hi = scalarised_policy(cmdp, hi);
  while (!feasible(at_hi) && hi < kLambdaCap) {
    hi = std::min(2.0 * hi, kLambdaCap);
    at_hi = scalarised_policy(cmdp, hi);
  }
  consider(at_hi);

  double lo = 0.0;
  if (feasible(at_hi)) {
    for (int iter = 0; iter < 60 && hi - lo > 1e-12 * (1.0 + hi); ++iter) {
      const double mid = 0.5 * (lo + hi);
      Evaluated e = scalarised_policy(cmdp, mid);
      if (feasible(e)) {
        hi = mid;
        consider(std::move(e));
      } else {
        lo = mid;
      }
    }
  }
  if (!best) {
    // Scalarisation never reached the budget before the cap; the min-cost
    // policy is feasible by the check above.
    const OptimalValues safest = value_iteration(cmdp.transition(), -cmdp.cost(), cmdp.gamma());
    consider(evaluate(cmdp, safest.policy()));
  }
  if (!best) {
    throw InfeasibleError("soft constraint: no feasible deterministic policy found", floor);
  }
  return to_solution(*best, no_dead, hi);
}

}  // namespace

ActionMask unsafe_closure(const Matrix& transition, const Matrix& cost) {
  const auto S = cost.rows();
  const auto A = cost.cols();
  if (transition.rows() != S * A || transition.cols() != S) {
    throw std::invalid_argument("unsafe_closure: transition must be (S*A) x S");
  }
  ActionMask mask = (cost.array() > 0.0);
  bool changed = true;
  while (changed) {
    changed = false;
    const std::vector<bool> dead = dead_states(mask);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index a = 0; a < A; ++a) {
        if (mask(s, a)) continue;
        const auto row = transition.row(sa_index(s, a, A));
        for (Eigen::Index next = 0; next < S; ++next) {
          if (row(next) > 0.0 && dead[static_cast<std::size_t>(next)]) {
            mask(s, a) = true;
            changed = true;
            break;
          }
        }
      }
    }
  }
  return mask;
}

ActionMask unsafe_closure(const Cmdp& cmdp) {
  if (cmdp.budget() != 0.0) {
    throw std::invalid_argument("unsafe_closure: only defined for a zero budget");
  }
  return unsafe_closure(cmdp.transition(), cmdp.cost());
}

std::vector<bool> dead_states(const ActionMask& mask) {
  std::vector<bool> dead(static_cast<std::size_t>(mask.rows()));
  for (Eigen::Index s = 0; s < mask.rows(); ++s) dead[s] = mask.row(s).all();
  return dead;
}

SafeSolution solve_cmdp(const Cmdp& cmdp) {
  return cmdp.budget() == 0.0 ? solve_hard(cmdp) : solve_soft(cmdp);
}

BruteForceResult brute_force_cmdp(const Cmdp& cmdp) {
  const int S = cmdp.n_states();
  const int A = cmdp.n_actions();
  if (S > 6 || A > 4 || std::pow(static_cast<double>(A), S) > 4096.0) {
    throw std::invalid_argument("brute_force_cmdp: instance too large to enumerate");
  }
  const double tol = cmdp.budget() == 0.0 ? kHardCostTol : kSoftCostTol;
  BruteForceResult out;
  out.min_cost = std::numeric_limits<double>::infinity();

  std::vector<int> actions(static_cast<std::size_t>(S), 0);
  while (true) {
    Evaluated e = evaluate(cmdp, Policy::deterministic(actions, A));
    out.min_cost = std::min(out.min_cost, e.cost);
    if (e.cost <= cmdp.budget() + tol && (!out.feasible || e.reward > out.value)) {
      out.feasible = true;
      out.value = e.reward;
      out.policy = e.policy;
    }
    int pos = 0;
    while (pos < S && ++actions[pos] == A) actions[pos++] = 0;
    if (pos == S) break;
  }
  return out;
}

}  // namespace icrl
