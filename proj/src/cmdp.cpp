#include "icrl/cmdp.hpp"

#include "icrl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace icrl {

namespace {

constexpr double kStochasticTol = 1e-9;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

void check_gamma(double gamma) {
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
}

void check_shapes(const Matrix& transition, const Matrix& signal, const Matrix& policy) {
  const auto S = signal.rows();
  const auto A = signal.cols();
  require(S > 0 && A > 0, "empty state or action space");
  require(transition.rows() == S * A && transition.cols() == S,
          "transition must be (S*A) x S");
  require(policy.rows() == S && policy.cols() == A, "policy must be S x A");
  require(all_finite(transition) && all_finite(signal) && all_finite(policy),
          "non-finite input");
}

// S x A view of an (S*A)-vector laid out as s*A + a.
Matrix to_state_action(const Vector& flat, Eigen::Index S, Eigen::Index A) {
  return Eigen::Map<const Matrix>(flat.data(), A, S).transpose();
}

Vector solve_discounted(const Matrix& kernel, const Vector& rhs, double gamma, Eigen::Index n_sa,
                        LinearSolver solver) {
  const bool direct = solver == LinearSolver::direct ||
                      (solver == LinearSolver::automatic && n_sa <= kDirectSolveLimit);
  const auto S = kernel.rows();
  if (direct) {
    Matrix system = Matrix::Identity(S, S) - gamma * kernel;
    return system.partialPivLu().solve(rhs);
  }
  Vector x = rhs;
  for (int sweep = 0; sweep < 100000; ++sweep) {
    Vector next = rhs + gamma * (kernel * x);
    const double change = (next - x).cwiseAbs().maxCoeff();
    x.swap(next);
    if (change <= 1e-10) return x;
  }
  throw std::runtime_error("iterative policy evaluation did not converge");
}

}  // namespace

// ---------------------------------------------------------------------------
// Cmdp

Cmdp::Cmdp(Matrix transition, Matrix reward, Matrix cost, double budget, Vector mu0, double gamma,
           double r_max, double c_max)
    : Cmdp(std::move(transition), std::move(reward), std::move(cost), budget, std::move(mu0),
           gamma, r_max, c_max, false) {}

Cmdp Cmdp::estimated(Matrix transition, Matrix reward, Matrix cost, double budget, Vector mu0,
                     double gamma, double r_max, double c_max) {
  return Cmdp(std::move(transition), std::move(reward), std::move(cost), budget, std::move(mu0),
              gamma, r_max, c_max, true);
}

Cmdp::Cmdp(Matrix transition, Matrix reward, Matrix cost, double budget, Vector mu0, double gamma,
           double r_max, double c_max, bool substochastic)
    : transition_(std::move(transition)),
      reward_(std::move(reward)),
      cost_(std::move(cost)),
      budget_(budget),
      mu0_(std::move(mu0)),
      gamma_(gamma),
      r_max_(r_max),
      c_max_(c_max),
      substochastic_(substochastic) {
  const auto S = reward_.rows();
  const auto A = reward_.cols();
  require(S > 0 && A > 0, "Cmdp: empty state or action space");
  require(cost_.rows() == S && cost_.cols() == A, "Cmdp: cost must be S x A");
  require(transition_.rows() == S * A && transition_.cols() == S,
          "Cmdp: transition must be (S*A) x S");
  require(mu0_.size() == S, "Cmdp: mu0 must have S entries");
  require(all_finite(transition_) && all_finite(reward_) && all_finite(cost_) &&
              mu0_.allFinite() && std::isfinite(budget_),
          "Cmdp: non-finite input");
  check_gamma(gamma_);
  require(r_max_ > 0.0 && c_max_ > 0.0, "Cmdp: R_max and C_max must be positive");
  require(budget_ >= 0.0, "Cmdp: budget must be non-negative");
  require(transition_.minCoeff() >= 0.0, "Cmdp: negative transition probability");
  for (Eigen::Index row = 0; row < transition_.rows(); ++row) {
    const double sum = transition_.row(row).sum();
    if (substochastic_) {
      require(sum <= 1.0 + kStochasticTol, "Cmdp: transition row sums above one");
    } else {
      require(std::abs(sum - 1.0) <= kStochasticTol,
              "Cmdp: transition row " + std::to_string(row) + " is not a distribution");
    }
  }
  require(reward_.minCoeff() >= 0.0 && reward_.maxCoeff() <= r_max_,
          "Cmdp: reward outside [0, R_max]");
  require(cost_.minCoeff() >= 0.0 && cost_.maxCoeff() <= c_max_, "Cmdp: cost outside [0, C_max]");
  require(mu0_.minCoeff() >= 0.0 && std::abs(mu0_.sum() - 1.0) <= kStochasticTol,
          "Cmdp: mu0 is not a distribution");
}

Cmdp Cmdp::with_cost(Matrix cost) const {
  Cmdp out = *this;
  if (cost.rows() != cost_.rows() || cost.cols() != cost_.cols() || !cost.allFinite()) {
    throw std::invalid_argument("Cmdp::with_cost: cost must be a finite S x A matrix");
  }
  out.cost_ = std::move(cost);
  return out;
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(Matrix probs) : probs_(std::move(probs)) {
  require(probs_.rows() > 0 && probs_.cols() > 0, "Policy: empty matrix");
  require(all_finite(probs_) && probs_.minCoeff() >= 0.0, "Policy: negative or non-finite entry");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    require(std::abs(probs_.row(s).sum() - 1.0) <= kStochasticTol,
            "Policy: row " + std::to_string(s) + " is not a distribution");
  }
}

Policy Policy::uniform(int n_states, int n_actions) {
  return Policy(Matrix::Constant(n_states, n_actions, 1.0 / n_actions));
}

Policy Policy::deterministic(const std::vector<int>& actions, int n_actions) {
  Matrix probs = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] >= 0 && actions[s] < n_actions, "Policy: action out of range");
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return Policy(std::move(probs));
}

bool Policy::is_deterministic() const {
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (probs_.row(s).maxCoeff() != 1.0) return false;
  }
  return true;
}

int Policy::action(int s) const {
  Eigen::Index a;
  if (probs_.row(s).maxCoeff(&a) != 1.0) {
    throw std::logic_error("Policy::action: row is not one-hot");
  }
  return static_cast<int>(a);
}

int Policy::sample(int s, Rng& rng) const {
  const auto row = probs_.row(s);
  Eigen::Index a;
  if (row.maxCoeff(&a) == 1.0) return static_cast<int>(a);
  return rng.categorical(row, n_actions());
}

// ---------------------------------------------------------------------------
// Evaluation

Matrix state_kernel(const Matrix& transition, const Matrix& policy) {
  const auto S = policy.rows();
  const auto A = policy.cols();
  Matrix kernel = Matrix::Zero(S, S);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      const double w = policy(s, a);
      if (w != 0.0) kernel.row(s).noalias() += w * transition.row(sa_index(s, a, A));
    }
  }
  return kernel;
}

ValuePair policy_evaluation(const Matrix& transition, const Matrix& signal, const Matrix& policy,
                            double gamma, LinearSolver solver) {
  check_shapes(transition, signal, policy);
  check_gamma(gamma);
  const auto S = signal.rows();
  const auto A = signal.cols();

  const Matrix kernel = state_kernel(transition, policy);
  const Vector g_pi = (policy.array() * signal.array()).rowwise().sum();
  const Vector v = solve_discounted(kernel, g_pi, gamma, S * A, solver);

  ValuePair out;
  out.q = signal + gamma * to_state_action(transition * v, S, A);
  out.v = (policy.array() * out.q.array()).rowwise().sum();
  out.adv = out.q.colwise() - out.v;
  return out;
}

ValuePair policy_evaluation(const Cmdp& cmdp, const Matrix& signal, const Policy& policy) {
  return policy_evaluation(cmdp.transition(), signal, policy.probs(), cmdp.gamma());
}

double bellman_evaluation_residual(const Matrix& transition, const Matrix& signal,
                                   const Matrix& policy, double gamma, const Matrix& q) {
  const auto S = signal.rows();
  const auto A = signal.cols();
  const Vector v = (policy.array() * q.array()).rowwise().sum();
  const Matrix backup = signal + gamma * to_state_action(transition * v, S, A);
  return (backup - q).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Optimal control

Policy OptimalValues::policy() const {
  return Policy::deterministic(greedy, static_cast<int>(q.cols()));
}

OptimalValues value_iteration(const Matrix& transition, const Matrix& signal, double gamma,
                              const ActionMask* mask, LinearSolver solver) {
  const auto S = signal.rows();
  const auto A = signal.cols();
  check_shapes(transition, signal, Matrix::Zero(S, A));
  check_gamma(gamma);
  if (mask != nullptr) require(mask->rows() == S && mask->cols() == A, "mask must be S x A");

  auto live = [&](Eigen::Index s, Eigen::Index a) { return mask == nullptr || !(*mask)(s, a); };

  OptimalValues out;
  out.dead.assign(static_cast<std::size_t>(S), false);
  std::vector<int> actions(static_cast<std::size_t>(S), 0);
  for (Eigen::Index s = 0; s < S; ++s) {
    int best = -1;
    for (Eigen::Index a = 0; a < A; ++a) {
      if (live(s, a) && (best < 0 || signal(s, a) > signal(s, best))) best = static_cast<int>(a);
    }
    out.dead[s] = best < 0;
    actions[s] = best < 0 ? 0 : best;
  }

  auto policy_matrix = [&](const std::vector<int>& acts) {
    Matrix pi = Matrix::Zero(S, A);
    for (Eigen::Index s = 0; s < S; ++s) {
      if (!out.dead[s]) pi(s, acts[s]) = 1.0;
    }
    return pi;
  };
  auto backup = [&](const Vector& v) {
    return Matrix(signal + gamma * to_state_action(transition * v, S, A));
  };

  Vector v;
  Matrix q;
  for (int round = 0; round < 10000; ++round) {
    const Matrix pi = policy_matrix(actions);
    const Matrix kernel = state_kernel(transition, pi);
    const Vector g_pi = (pi.array() * signal.array()).rowwise().sum();
    v = solve_discounted(kernel, g_pi, gamma, S * A, solver);
    q = backup(v);

    bool changed = false;
    for (Eigen::Index s = 0; s < S; ++s) {
      if (out.dead[s]) continue;
      const double current = q(s, actions[s]);
      int best = actions[s];
      double best_q = current;
      for (Eigen::Index a = 0; a < A; ++a) {
        if (live(s, a) && q(s, a) > best_q) {
          best_q = q(s, a);
          best = static_cast<int>(a);
        }
      }
      if (best_q > current + 1e-12 * (1.0 + std::abs(current))) {
        actions[s] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }

  out.v = Vector::Zero(S);
  out.greedy.assign(static_cast<std::size_t>(S), 0);
  for (Eigen::Index s = 0; s < S; ++s) {
    if (out.dead[s]) continue;
    double best_q = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < A; ++a) {
      if (live(s, a)) best_q = std::max(best_q, q(s, a));
    }
    out.v(s) = best_q;
    const double tie = 1e-10 * (1.0 + std::abs(best_q));
    for (Eigen::Index a = 0; a < A; ++a) {
      if (live(s, a) && q(s, a) >= best_q - tie) {
        out.greedy[s] = static_cast<int>(a);
        break;
      }
    }
  }
  out.q = backup(out.v);
  for (Eigen::Index s = 0; s < S; ++s) {
    if (out.dead[s]) continue;
    double best_q = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < A; ++a) {
      if (live(s, a)) best_q = std::max(best_q, out.q(s, a));
    }
    out.residual = std::max(out.residual, std::abs(best_q - out.v(s)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Occupancy measures

OccupancyMeasure occupancy_of_policy(const Matrix& transition, const Vector& mu0,
                                     const Matrix& policy, double gamma) {
  check_shapes(transition, policy, policy);
  check_gamma(gamma);
  require(mu0.size() == policy.rows() && mu0.allFinite(), "mu0 must be a finite S-vector");
  const auto S = policy.rows();
  const Matrix kernel = state_kernel(transition, policy);
  const Vector d = solve_discounted(kernel.transpose(), (1.0 - gamma) * mu0, gamma,
                                    S * policy.cols(), LinearSolver::automatic);
  return OccupancyMeasure{d.asDiagonal() * policy};
}

OccupancyMeasure occupancy_of_policy(const Cmdp& cmdp, const Policy& policy) {
  return occupancy_of_policy(cmdp.transition(), cmdp.mu0(), policy.probs(), cmdp.gamma());
}

double bellman_flow_residual(const Matrix& rho, const Matrix& transition, const Vector& mu0,
                             double gamma) {
  const auto S = rho.rows();
  const auto A = rho.cols();
  const Matrix rho_t = rho.transpose();
  const Eigen::Map<const Vector> flat(rho_t.data(), S * A);
  const Vector inflow = transition.transpose() * flat;
  const Vector outflow = rho.rowwise().sum();
  return (outflow - (1.0 - gamma) * mu0 - gamma * inflow).cwiseAbs().maxCoeff();
}

double bellman_flow_residual(const Matrix& rho, const Cmdp& cmdp) {
  return bellman_flow_residual(rho, cmdp.transition(), cmdp.mu0(), cmdp.gamma());
}

Policy policy_extraction(const Matrix& rho) {
  require(rho.rows() > 0 && rho.cols() > 0, "policy_extraction: empty matrix");
  require(rho.allFinite() && rho.minCoeff() >= 0.0, "policy_extraction: negative entry");
  Matrix probs(rho.rows(), rho.cols());
  for (Eigen::Index s = 0; s < rho.rows(); ++s) {
    const double mass = rho.row(s).sum();
    if (mass > 0.0) {
      probs.row(s) = rho.row(s) / mass;
    } else {
      probs.row(s).setConstant(1.0 / static_cast<double>(rho.cols()));
    }
  }
  return Policy(std::move(probs));
}

}  // namespace icrl
