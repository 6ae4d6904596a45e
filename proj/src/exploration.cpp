#include "icrl/exploration.hpp"

#include "icrl/crl_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace icrl {

namespace {

struct NamedStrategy {
  StrategyKind kind;
  std::string_view name;
};

constexpr NamedStrategy kNames[] = {
    {StrategyKind::bear, "bear"},
    {StrategyKind::pcse, "pcse"},
    {StrategyKind::random, "random"},
    {StrategyKind::eps_greedy, "eps-greedy"},
    {StrategyKind::max_entropy, "max-entropy"},
    {StrategyKind::ucb, "ucb"},
    {StrategyKind::uniform_generative, "uniform"},
};

}  // namespace

std::string_view strategy_name(StrategyKind kind) {
  for (const auto& n : kNames) {
    if (n.kind == kind) return n.name;
  }
  throw std::invalid_argument("unknown strategy kind");
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (const auto& n : kNames) {
    if (n.name == name) return n.kind;
  }
  return std::nullopt;
}

bool is_policy_level(StrategyKind kind) {
  return kind == StrategyKind::bear || kind == StrategyKind::pcse;
}

bool is_action_level(StrategyKind kind) {
  return kind == StrategyKind::random || kind == StrategyKind::eps_greedy ||
         kind == StrategyKind::max_entropy || kind == StrategyKind::ucb;
}

StrategyState StrategyState::initial(StrategyKind kind, double gamma) {
  StrategyState state;
  state.kind = kind;
  state.eps_k = 1.0 / (1.0 - gamma);
  state.r_hat = std::numeric_limits<double>::infinity();
  return state;
}

// ---------------------------------------------------------------------------
// BEAR

Policy bear_policy(const Matrix& width, const EstimatedProblem& est, double gamma) {
  return value_iteration(est.p_hat, width, gamma).policy();
}

double bear_accuracy(const Matrix& width, double gamma) {
  return width.maxCoeff() / (1.0 - gamma);
}

// ---------------------------------------------------------------------------
// PCSE

PcseCandidateSpec pcse_candidate_spec(const PcseProblem& pb) {
  const int S = static_cast<int>(pb.c_hat.rows());
  const int A = static_cast<int>(pb.c_hat.cols());
  const Cmdp model =
      Cmdp::estimated(pb.est.p_hat, pb.reward, Matrix::Zero(S, A), pb.budget_eps, pb.mu0, pb.gamma,
                      pb.r_max, pb.c_max)
          .with_cost(pb.c_hat);
  const SafeSolution best = solve_cmdp(model);
  const double one_minus = 1.0 - pb.gamma;
  PcseCandidateSpec spec;
  spec.r_hat_k = pb.r_hat;
  spec.cost_cap = one_minus * (best.cost_value(pb.mu0) + 4.0 * pb.eps_k + 2.0 * pb.budget_eps);
  spec.reward_floor = one_minus * (best.reward_value(pb.mu0) + pb.r_hat);
  return spec;
}

namespace {

struct Response {
  Policy policy;
  double cost_violation;
  double reward_violation;
  double worst() const { return std::max({cost_violation, reward_violation, 0.0}); }
};

Response respond(const PcseProblem& pb, const PcseCandidateSpec& spec, Policy policy) {
  const Matrix rho = occupancy_of_policy(pb.est.p_hat, pb.mu0, policy.probs(), pb.gamma).rho;
  const double cv = frobenius(rho, pb.c_hat) - spec.cost_cap;
  const double rv = spec.reward_floor - frobenius(rho, pb.reward);
  return Response{std::move(policy), cv, rv};
}

PcseResult fallback(const PcseProblem& pb, const PcseCandidateSpec& spec, double lambda1,
                    double lambda2, int iterations, std::string reason) {
  Response r = respond(pb, spec, bear_policy(pb.width, pb.est, pb.gamma));
  PcseDiagnostics d;
  d.lambda1 = lambda1;
  d.lambda2 = lambda2;
  d.cost_violation = r.cost_violation;
  d.reward_violation = r.reward_violation;
  d.dual_iterations = iterations;
  d.fallback = true;
  d.fallback_reason = std::move(reason);
  d.spec = spec;
  return PcseResult{std::move(r.policy), d};
}

}  // namespace

PcseResult pcse_dual_ascent(const PcseProblem& pb, const PcseCandidateSpec& spec, double& lambda1,
                            double& lambda2, const PcseOptions& opt) {
  std::optional<Response> best;
  int t = 0;
  while (t < opt.max_steps) {
    ++t;
    const Matrix gain = pb.width - lambda1 * pb.c_hat + lambda2 * pb.reward;
    Response r = respond(pb, spec, value_iteration(pb.est.p_hat, gain, pb.gamma).policy());
    const double cv = r.cost_violation;
    const double rv = r.reward_violation;
    const bool done = r.worst() <= opt.tolerance;
    if (!best || r.worst() < best->worst()) best = std::move(r);
    if (done) break;
    const double step = opt.step0 / std::pow(static_cast<double>(t), 0.75);
    lambda1 = std::max(0.0, lambda1 + step * cv);
    lambda2 = std::max(0.0, lambda2 + step * rv);
  }
  if (!best || best->worst() > opt.tolerance) {
    return fallback(pb, spec, lambda1, lambda2, t, "no feasible best response");
  }
  PcseDiagnostics d;
  d.lambda1 = lambda1;
  d.lambda2 = lambda2;
  d.cost_violation = best->cost_violation;
  d.reward_violation = best->reward_violation;
  d.dual_iterations = t;
  d.spec = spec;
  return PcseResult{std::move(best->policy), d};
}

PcseResult pcse_policy(const PcseProblem& pb, double& lambda1, double& lambda2,
                       const PcseOptions& opt) {
  PcseCandidateSpec spec;
  try {
    spec = pcse_candidate_spec(pb);
  } catch (const InfeasibleError& e) {
    spec.cost_cap = std::numeric_limits<double>::infinity();
    spec.reward_floor = -std::numeric_limits<double>::infinity();
    spec.r_hat_k = pb.r_hat;
    return fallback(pb, spec, lambda1, lambda2, 0, e.what());
  }
  // Each constraint on its own is a plain MDP; if either alone cannot be met
  // the candidate set is empty and the dual loop would only diverge.
  const double one_minus = 1.0 - pb.gamma;
  const double best_reward =
      one_minus * pb.mu0.dot(value_iteration(pb.est.p_hat, pb.reward, pb.gamma).v);
  if (best_reward < spec.reward_floor - opt.tolerance) {
    return fallback(pb, spec, lambda1, lambda2, 0, "reward floor unattainable");
  }
  const double least_cost =
      -one_minus * pb.mu0.dot(value_iteration(pb.est.p_hat, -pb.c_hat, pb.gamma).v);
  if (least_cost > spec.cost_cap + opt.tolerance) {
    return fallback(pb, spec, lambda1, lambda2, 0, "cost cap unattainable");
  }
  return pcse_dual_ascent(pb, spec, lambda1, lambda2, opt);
}

double pcse_accuracy(const Matrix& width, const EstimatedProblem& est, const Policy& policy,
                     double gamma) {
  return policy_evaluation(est.p_hat, width, policy.probs(), gamma).v.maxCoeff();
}

double r_hat_surrogate(const CountTable& counts, double delta, double r_max, double gamma) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("r_hat_surrogate: delta must lie in (0, 1)");
  }
  const int S = counts.n_states();
  const int A = counts.n_actions();
  auto beta = [&](double n) {
    const double np = plus(n);
    return std::min(2.0, std::sqrt(2.0 * log_term(S, A, np, delta) / np));
  };
  double beta_p = 0.0;
  double beta_pi = 0.0;
  for (int s = 0; s < S; ++s) {
    beta_pi = std::max(beta_pi, beta(static_cast<double>(counts.N(s))));
    for (int a = 0; a < A; ++a) beta_p = std::max(beta_p, beta(static_cast<double>(counts.N(s, a))));
  }
  const double scale = gamma * r_max / ((1.0 - gamma) * (1.0 - gamma));
  return 2.0 * scale * beta_p + scale * beta_pi;
}

// ---------------------------------------------------------------------------
// Action-level baselines

double eps_greedy_probability(int k) {
  return k <= 1 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(k));
}

namespace {

int argmax_row(const Matrix& q, int s) {
  int best = 0;
  for (int a = 1; a < q.cols(); ++a) {
    if (q(s, a) > q(s, best)) best = a;
  }
  return best;
}

}  // namespace

int baseline_action(StrategyKind kind, int s, const CountMatrix& n_sa, int k, Rng& rng,
                    const Matrix* bear_q) {
  const int A = static_cast<int>(n_sa.cols());
  if (s < 0 || s >= n_sa.rows()) throw std::out_of_range("baseline_action: bad state");
  switch (kind) {
    case StrategyKind::random:
      return rng.below(A);
    case StrategyKind::eps_greedy: {
      if (bear_q == nullptr) throw std::invalid_argument("baseline_action: eps_greedy needs Q");
      if (rng.uniform() < eps_greedy_probability(k)) return rng.below(A);
      return argmax_row(*bear_q, s);
    }
    case StrategyKind::max_entropy: {
      int best = 0;
      for (int a = 1; a < A; ++a) {
        if (n_sa(s, a) < n_sa(s, best)) best = a;
      }
      return best;
    }
    case StrategyKind::ucb: {
      const double log_n = std::log(plus(static_cast<double>(n_sa.row(s).sum())));
      int best = 0;
      double best_bonus = -1.0;
      for (int a = 0; a < A; ++a) {
        const double n = static_cast<double>(n_sa(s, a));
        const double bonus =
            n == 0.0 ? std::numeric_limits<double>::infinity() : std::sqrt(2.0 * log_n / n);
        if (bonus > best_bonus) {
          best_bonus = bonus;
          best = a;
        }
      }
      return best;
    }
    default:
      throw std::invalid_argument("baseline_action: not an action-level strategy");
  }
}

GenerativeBatch uniform_generative_round(const GenerativeModel& model, int n_max, Rng& env_rng,
                                         Rng& expert_rng) {
  if (!model.enabled()) {
    throw std::logic_error("uniform_generative_round: generative access is disabled");
  }
  if (n_max < 1) throw std::invalid_argument("uniform_generative_round: n_max must be >= 1");
  const int S = model.cmdp().n_states();
  const int A = model.cmdp().n_actions();
  const int per_pair = (n_max + S * A - 1) / (S * A);
  GenerativeBatch batch;
  batch.transitions.reserve(static_cast<std::size_t>(per_pair) * S * A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      for (int i = 0; i < per_pair; ++i) batch.transitions.push_back(model.sample(s, a, env_rng));
    }
  }
  for (int s = 0; s < S; ++s) {
    if (const auto a_e = model.query_expert(s, expert_rng)) {
      batch.expert_obs.push_back(ExpertObservation{s, *a_e});
    } else {
      batch.absent_queries.push_back(s);
    }
  }
  return batch;
}

}  // namespace icrl
