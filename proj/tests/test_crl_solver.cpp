#include "icrl/crl_solver.hpp"
#include "icrl/envs.hpp"
#include "icrl/rng.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace icrl;
using namespace icrl::testing;

namespace {

// s0: a0 -> s1, a1 -> s2. s1: both actions -> s2 with cost. s2 absorbing.
Cmdp fork(double budget) {
  const Matrix p = deterministic_kernel({{1, 2}, {2, 2}, {2, 2}});
  Matrix r = Matrix::Zero(3, 2);
  r(1, 0) = r(1, 1) = 1.0;
  r(0, 1) = 0.5;
  Matrix c = Matrix::Zero(3, 2);
  c(1, 0) = c(1, 1) = 1.0;
  return Cmdp(p, r, c, budget, delta_at(3, 0), 0.9, 1.0, 1.0);
}

}  // namespace

TEST_SUITE("crl_solver") {
  TEST_CASE("unsafe closure: chain propagates one step back") {
    const Matrix p = deterministic_kernel({{1}, {1}});
    Matrix c(2, 1);
    c << 0.0, 1.0;
    const ActionMask mask = unsafe_closure(p, c);
    CHECK(mask(0, 0));
    CHECK(mask(1, 0));
    CHECK(dead_states(mask) == std::vector<bool>{true, true});
  }

  TEST_CASE("unsafe closure: zero cost masks nothing") {
    std::mt19937_64 gen(1);
    const Matrix p = random_kernel(gen, 4, 3);
    CHECK_FALSE(unsafe_closure(p, Matrix::Zero(4, 3)).any());
  }

  TEST_CASE("unsafe closure: fork masks only the costly branch entry") {
    const ActionMask mask = unsafe_closure(fork(0.0));
    CHECK(mask(0, 0));        // enters s1, whose actions all cost
    CHECK_FALSE(mask(0, 1));  // goes straight to the absorbing state
    CHECK(mask(1, 0));
    CHECK(mask(1, 1));
    CHECK_FALSE(mask.row(2).any());
  }

  TEST_CASE("unsafe closure needs a zero budget") {
    CHECK_THROWS_AS(unsafe_closure(fork(0.5)), std::invalid_argument);
  }

  TEST_CASE("unsafe closure is monotone in the cost") {
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix p = random_kernel(gen, 5, 3);
      Matrix c = random_binary_cost(gen, 5, 3, 0.1);
      const ActionMask before = unsafe_closure(p, c);
      c(trial % 5, trial % 3) = 1.0;
      const ActionMask after = unsafe_closure(p, c);
      CHECK((after || !before).all());
    }
  }

  TEST_CASE("zero-cost problem solves like value iteration") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
      const Cmdp m = random_cmdp(gen, 5, 3, 0.9, 0.0);
      const SafeSolution sol = solve_cmdp(m);
      const OptimalValues opt = value_iteration(m.transition(), m.reward(), m.gamma());
      CHECK(sol.policy == opt.policy());
      CHECK((sol.v_reward - opt.v).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK_FALSE(sol.lambda_star.has_value());
    }
  }

  TEST_CASE("hard constraint picks the only safe action") {
    // One state, action 0 pays more but costs.
    Matrix r(1, 2);
    r << 1.0, 0.2;
    Matrix c(1, 2);
    c << 1.0, 0.0;
    const Cmdp m(Matrix::Ones(2, 1), r, c, 0.0, Vector::Ones(1), 0.9, 1.0, 1.0);
    const SafeSolution sol = solve_cmdp(m);
    CHECK(sol.policy.action(0) == 1);
    CHECK(sol.cost_value(m.mu0()) == 0.0);
    CHECK(sol.reward_value(m.mu0()) == doctest::Approx(2.0));
  }

  TEST_CASE("hard constraint on the fork; infeasible start reported") {
    const SafeSolution sol = solve_cmdp(fork(0.0));
    CHECK(sol.policy.action(0) == 1);
    CHECK(sol.is_dead(1));
    CHECK_FALSE(sol.is_dead(0));

    Matrix c = Matrix::Ones(1, 2);
    const Cmdp doomed(Matrix::Ones(2, 1), Matrix::Zero(1, 2), c, 0.0, Vector::Ones(1), 0.9, 1.0,
                      1.0);
    try {
      solve_cmdp(doomed);
      FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
      CHECK(e.min_cost() == doctest::Approx(10.0));
    }
  }

  TEST_CASE("soft constraint keeps the budget") {
    std::mt19937_64 gen(4);
    int solved = 0;
    for (int trial = 0; trial < 60; ++trial) {
      const Cmdp probe = random_cmdp(gen, 4, 3, 0.9, 0.4);
      const double floor = -probe.mu0().dot(
          value_iteration(probe.transition(), -probe.cost(), probe.gamma()).v);
      const double budget = floor + 0.5 + 0.1 * (trial % 10);
      const Cmdp m(probe.transition(), probe.reward(), probe.cost(), budget, probe.mu0(), 0.9,
                   1.0, 1.0);
      const SafeSolution sol = solve_cmdp(m);
      CHECK(sol.cost_value(m.mu0()) <= budget + 1e-6);
      CHECK(sol.lambda_star.has_value());
      CHECK(sol.policy.is_deterministic());
      ++solved;
    }
    CHECK(solved == 60);
  }

  TEST_CASE("soft constraint infeasibility names the smallest cost") {
    Matrix c(1, 2);
    c << 1.0, 0.5;
    const Cmdp m(Matrix::Ones(2, 1), Matrix::Zero(1, 2), c, 1.0, Vector::Ones(1), 0.9, 1.0, 1.0);
    try {
      solve_cmdp(m);
      FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
      CHECK(e.min_cost() == doctest::Approx(5.0));
      CHECK(std::string(e.what()).find("5") != std::string::npos);
    }
  }

  TEST_CASE("brute force agrees with the solver on small hard instances") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 50; ++trial) {
      const int S = 2 + trial % 4;
      const int A = 2 + trial % 2;
      const Cmdp m = random_cmdp(gen, S, A, 0.9, 0.15);
      const BruteForceResult oracle = brute_force_cmdp(m);
      bool solver_feasible = true;
      double value = 0.0;
      try {
        value = solve_cmdp(m).reward_value(m.mu0());
      } catch (const InfeasibleError&) {
        solver_feasible = false;
      }
      CHECK(solver_feasible == oracle.feasible);
      if (oracle.feasible && solver_feasible) CHECK(std::abs(value - oracle.value) <= 1e-8);
    }
  }

  TEST_CASE("brute force on an unconstrained instance matches value iteration") {
    std::mt19937_64 gen(6);
    const Cmdp m = random_cmdp(gen, 4, 3, 0.8, 0.0);
    const BruteForceResult oracle = brute_force_cmdp(m);
    const OptimalValues opt = value_iteration(m.transition(), m.reward(), m.gamma());
    CHECK(oracle.feasible);
    CHECK(oracle.value == doctest::Approx(m.mu0().dot(opt.v)).epsilon(1e-10));
  }

  TEST_CASE("brute force rejects large instances") {
    std::mt19937_64 gen(7);
    CHECK_THROWS_AS(brute_force_cmdp(random_cmdp(gen, 7, 2, 0.9, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(brute_force_cmdp(random_cmdp(gen, 3, 5, 0.9, 0.0)), std::invalid_argument);
  }

  TEST_CASE("expert on gridworld 1 never enters a constrained cell") {
    const Gridworld world = make_gridworld(load_layout(ICRL_ENV_DIR "/setting1.txt"), 0.95);
    const SafeSolution sol = solve_cmdp(world.cmdp);
    CHECK(sol.cost_value(world.cmdp.mu0()) <= 1e-8);
    const ExpertOracle expert{sol.policy, sol.dead};
    Rng env(1), pol(2), exp(3);
    for (int episode = 0; episode < 10000; ++episode) {
      const EpisodeRecord rec = run_episode(world.cmdp, sol.policy, world.layout.horizon,
                                            EpisodeStreams{env, pol, exp}, expert);
      for (const Step& st : rec.steps) {
        REQUIRE_FALSE(world.layout.is_constrained(world.layout.cell(st.next)));
      }
    }
  }
}
