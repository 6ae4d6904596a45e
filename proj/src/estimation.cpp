#include "icrl/estimation.hpp"

#include "icrl/crl_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace icrl {

// ---------------------------------------------------------------------------
// Counts

CountTable::CountTable(int n_states, int n_actions)
    : n_states_(n_states),
      n_actions_(n_actions),
      n_sas_(CountMatrix::Zero(n_states * n_actions, n_states)),
      cum_sas_(CountMatrix::Zero(n_states * n_actions, n_states)),
      cum_sa_(CountMatrix::Zero(n_states, n_actions)),
      cum_s_(CountVector::Zero(n_states)),
      expert_sa_(CountMatrix::Zero(n_states, n_actions)) {
  if (n_states <= 0 || n_actions <= 0) {
    throw std::invalid_argument("CountTable: empty state or action space");
  }
}

void CountTable::begin_iteration() { n_sas_.setZero(); }

void CountTable::check_pair(int s, int a) const {
  if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_) {
    throw std::out_of_range("CountTable: pair (" + std::to_string(s) + "," + std::to_string(a) +
                            ") out of range");
  }
}

void CountTable::add_transition(const Transition& t) {
  check_pair(t.s, t.a);
  if (t.next < 0 || t.next >= n_states_) {
    throw std::out_of_range("CountTable: next state " + std::to_string(t.next) + " out of range");
  }
  const auto row = sa_index(t.s, t.a, n_actions_);
  ++n_sas_(row, t.next);
  ++cum_sas_(row, t.next);
  ++cum_sa_(t.s, t.a);
  ++cum_s_(t.s);
}

void CountTable::add_expert(const ExpertObservation& e) {
  check_pair(e.s, e.a);
  ++expert_sa_(e.s, e.a);
}

CountTable update_counts(CountTable counts, std::span<const Transition> transitions,
                         std::span<const ExpertObservation> expert_obs) {
  for (const auto& t : transitions) counts.add_transition(t);
  for (const auto& e : expert_obs) counts.add_expert(e);
  return counts;
}

// ---------------------------------------------------------------------------
// Empirical models and widths

EstimatedProblem empirical_models(const CountTable& counts, double delta, int k) {
  const int S = counts.n_states();
  const int A = counts.n_actions();
  EstimatedProblem est;
  est.k = k;
  est.delta = delta;
  est.p_hat = counts.cum_sas().cast<double>();
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      est.p_hat.row(sa_index(s, a, A)) /= plus(static_cast<double>(counts.N(s, a)));
    }
  }
  est.pi_hat = counts.expert_sa().cast<double>();
  for (int s = 0; s < S; ++s) {
    est.pi_hat.row(s) /= plus(static_cast<double>(counts.expert_sa().row(s).sum()));
  }
  return est;
}

double sigma_constant(double r_max, double c_max, double gamma, double min_pos_adv) {
  if (!(min_pos_adv > 0.0)) {
    throw std::invalid_argument("sigma_constant: min positive advantage must be > 0");
  }
  const double one_minus = 1.0 - gamma;
  return gamma * c_max * (r_max * (3.0 + gamma) / min_pos_adv + one_minus) /
         (one_minus * one_minus);
}

std::optional<double> min_positive_abs(const Matrix& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = std::abs(x.data()[i]);
    if (v > 0.0 && v < best) best = v;
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

double advantage_scale(const Matrix& advantage, double floor) {
  const auto m = min_positive_abs(advantage);
  return m ? std::max(*m, floor) : floor;
}

double log_term(int n_states, int n_actions, double n, double delta) {
  const double np = plus(n);
  return std::log(36.0 * n_states * n_actions * np * np / delta);
}

Matrix confidence_width(const CountTable& counts, double delta, double sigma, double c_max) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("confidence_width: delta must lie in (0, 1)");
  }
  const int S = counts.n_states();
  const int A = counts.n_actions();
  Matrix width(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double n = plus(static_cast<double>(counts.N(s, a)));
      const double l = log_term(S, A, n, delta);
      width(s, a) = std::min(sigma * std::sqrt(l / (2.0 * n)), c_max);
    }
  }
  return width;
}

// ---------------------------------------------------------------------------
// Cost recovery

Matrix expert_advantage(const EstimatedProblem& est, const Matrix& reward, double gamma) {
  return policy_evaluation(est.p_hat, reward, est.pi_hat, gamma).adv;
}

Matrix recover_cost(const EstimatedProblem& est, const Matrix& reward, double gamma, double c_max,
                    ConstraintMode mode, const std::optional<Vector>& v_c) {
  return recover_cost_from_advantage(est, expert_advantage(est, reward, gamma), gamma, c_max, mode,
                                     v_c);
}

Matrix recover_cost_from_advantage(const EstimatedProblem& est, const Matrix& advantage,
                                   double gamma, double c_max, ConstraintMode mode,
                                   const std::optional<Vector>& v_c) {
  const auto S = est.pi_hat.rows();
  const auto A = est.pi_hat.cols();
  if (mode == ConstraintMode::soft && !v_c) {
    throw std::invalid_argument("recover_cost: soft mode needs V^c");
  }
  Matrix c_hat = Matrix::Zero(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    if (est.pi_hat.row(s).sum() <= 0.0) continue;  // no expert data at s
    for (Eigen::Index a = 0; a < A; ++a) {
      if (est.pi_hat(s, a) == 0.0 && advantage(s, a) > kAdvantageTol) c_hat(s, a) = c_max;
    }
  }
  if (mode == ConstraintMode::soft) {
    const Vector& v = *v_c;
    if (v.size() != S) throw std::invalid_argument("recover_cost: V^c must have S entries");
    const Vector pv = est.p_hat * v;
    for (Eigen::Index s = 0; s < S; ++s) {
      if (est.pi_hat.row(s).sum() <= 0.0) continue;
      for (Eigen::Index a = 0; a < A; ++a) {
        c_hat(s, a) += v(s) - gamma * pv(sa_index(s, a, A));
      }
    }
  }
  return c_hat;
}

Matrix expert_rows(const Policy& expert, const std::vector<bool>& dead) {
  Matrix rows = expert.probs();
  for (Eigen::Index s = 0; s < rows.rows(); ++s) {
    if (dead[static_cast<std::size_t>(s)]) rows.row(s).setZero();
  }
  return rows;
}

FeasibilityReport feasibility_check(const Matrix& cost, const Cmdp& cmdp, const Policy& expert,
                                    const std::vector<bool>& dead, double tol) {
  const int S = cmdp.n_states();
  const int A = cmdp.n_actions();
  if (static_cast<int>(dead.size()) != S) {
    throw std::invalid_argument("feasibility_check: dead-state flags must have S entries");
  }
  const Matrix pi = expert_rows(expert, dead);
  const ValuePair vc = policy_evaluation(cmdp.transition(), cost, pi, cmdp.gamma());
  const ValuePair vr = policy_evaluation(cmdp.transition(), cmdp.reward(), pi, cmdp.gamma());

  FeasibilityReport report;
  report.cases.resize(S, A);
  report.satisfied = ActionMask::Constant(S, A, true);
  report.cost_gap = vc.adv;
  report.reward_adv = vr.adv;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double gap = vc.adv(s, a);
      if (dead[static_cast<std::size_t>(s)]) {
        report.cases(s, a) = PairCase::excluded;
      } else if (pi(s, a) > 0.0) {
        report.cases(s, a) = PairCase::expert_consistent;
        report.satisfied(s, a) = std::abs(gap) <= tol;
      } else if (vr.adv(s, a) > tol) {
        report.cases(s, a) = PairCase::constraint_violating;
        report.satisfied(s, a) = gap > tol;
      } else {
        report.cases(s, a) = PairCase::non_critical;
        report.satisfied(s, a) = gap <= tol;
      }
    }
  }
  report.verdict = report.satisfied.all();
  return report;
}

Matrix explicit_cost(const Matrix& transition, const Matrix& expert, const Matrix& reward,
                     double gamma, const Vector& v_c, const Matrix& zeta) {
  const auto S = reward.rows();
  const auto A = reward.cols();
  const Matrix adv = policy_evaluation(transition, reward, expert, gamma).adv;
  const Vector pv = transition * v_c;
  Matrix c(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      c(s, a) = adv(s, a) * zeta(s, a) + v_c(s) - gamma * pv(sa_index(s, a, A));
    }
  }
  return c;
}

Matrix error_propagation_bound(const EstimatedProblem& est, const Matrix& true_transition,
                               const Matrix& true_expert, const Matrix& reward, double gamma,
                               const Vector& v_c, const Matrix& zeta) {
  const auto S = reward.rows();
  const auto A = reward.cols();
  if (zeta.rows() != S || zeta.cols() != A || zeta.minCoeff() < 0.0) {
    throw std::invalid_argument("error_propagation_bound: zeta must be a non-negative S x A matrix");
  }
  const Matrix adv = policy_evaluation(true_transition, reward, true_expert, gamma).adv;
  const Matrix adv_hat = policy_evaluation(est.p_hat, reward, est.pi_hat, gamma).adv;
  const Vector model_gap = (true_transition - est.p_hat) * v_c;
  Matrix bound(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      bound(s, a) = gamma * std::abs(model_gap(sa_index(s, a, A))) +
                    std::abs(adv(s, a) - adv_hat(s, a)) * zeta(s, a);
    }
  }
  return bound;
}

// ---------------------------------------------------------------------------
// Pseudo-counts

PseudoCountAccumulator::PseudoCountAccumulator(Matrix transition, Vector mu0, int n_max)
    : transition_(std::move(transition)), mu0_(std::move(mu0)) {
  if (n_max < 1) throw std::invalid_argument("PseudoCountAccumulator: n_max must be >= 1");
  const auto S = mu0_.size();
  if (S == 0 || transition_.cols() != S || transition_.rows() % S != 0) {
    throw std::invalid_argument("PseudoCountAccumulator: kernel and mu0 disagree");
  }
  counts_.bar_n = Matrix::Zero(S, transition_.rows() / S);
  counts_.horizon = n_max;
}

void PseudoCountAccumulator::add(const Policy& policy) {
  const Matrix& pi = policy.probs();
  if (pi.rows() != counts_.bar_n.rows() || pi.cols() != counts_.bar_n.cols()) {
    throw std::invalid_argument("PseudoCountAccumulator: policy shape mismatch");
  }
  const Matrix step = state_kernel(transition_, pi).transpose();
  Vector d = mu0_;
  Vector visits = Vector::Zero(d.size());
  for (int h = 1; h <= counts_.horizon; ++h) {
    d = step * d;
    visits += d;
  }
  counts_.bar_n += visits.asDiagonal() * pi;
  ++policies_;
}

PseudoCounts pseudo_counts(std::span<const Policy> history, const Cmdp& cmdp, int n_max) {
  PseudoCountAccumulator acc(cmdp.transition(), cmdp.mu0(), n_max);
  for (const Policy& p : history) acc.add(p);
  return acc.counts();
}

Matrix pseudo_count_bound(const PseudoCounts& pc, int n_states, int n_actions, double delta,
                          double sigma, double c_max) {
  const double scale = std::max(sigma, std::sqrt(2.0) * c_max);
  Matrix bound(pc.bar_n.rows(), pc.bar_n.cols());
  for (Eigen::Index i = 0; i < bound.size(); ++i) {
    const double n = plus(pc.bar_n.data()[i]);
    bound.data()[i] = scale * std::sqrt(2.0 * log_term(n_states, n_actions, n, delta) / n);
  }
  return bound;
}

// ---------------------------------------------------------------------------
// PAC errors

Cmdp estimated_cmdp(const Cmdp& truth, const EstimatedProblem& est, const Matrix& c_hat) {
  Cmdp model = Cmdp::estimated(est.p_hat, truth.reward(), Matrix::Zero(truth.n_states(),
                               truth.n_actions()), truth.budget(), truth.mu0(), truth.gamma(),
                               truth.r_max(), truth.c_max());
  return model.with_cost(c_hat);
}

PacError pac_error(const Matrix& c_true, const Matrix& c_hat, const Cmdp& cmdp,
                   const EstimatedProblem& est) {
  auto gap = [&](const SafeSolution& sol) {
    const ValuePair q_true = policy_evaluation(cmdp.transition(), c_true, sol.policy.probs(),
                                               cmdp.gamma());
    const ValuePair q_hat = policy_evaluation(cmdp.transition(), c_hat, sol.policy.probs(),
                                              cmdp.gamma());
    double worst = 0.0;
    for (int s = 0; s < cmdp.n_states(); ++s) {
      if (sol.is_dead(s)) continue;
      worst = std::max(worst, (q_true.q.row(s) - q_hat.q.row(s)).cwiseAbs().maxCoeff());
    }
    return worst;
  };
  const SafeSolution expert = solve_cmdp(cmdp.with_cost(c_true));
  const SafeSolution learned = solve_cmdp(estimated_cmdp(cmdp, est, c_hat));
  return PacError{gap(expert), gap(learned)};
}

}  // namespace icrl
