#include "icrl/crl_solver.hpp"
#include "icrl/envs.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace icrl;
using namespace icrl::testing;

namespace {

GridLayout shipped(int n) {
  return load_layout(ICRL_ENV_DIR "/setting" + std::to_string(n) + ".txt");
}

bool same_record(const EpisodeRecord& x, const EpisodeRecord& y) {
  if (x.steps.size() != y.steps.size() || x.expert_queries.size() != y.expert_queries.size()) {
    return false;
  }
  for (std::size_t i = 0; i < x.steps.size(); ++i) {
    const Step &a = x.steps[i], &b = y.steps[i];
    if (a.s != b.s || a.a != b.a || a.r != b.r || a.c != b.c || a.next != b.next) return false;
  }
  for (std::size_t i = 0; i < x.expert_queries.size(); ++i) {
    if (x.expert_queries[i].s != y.expert_queries[i].s ||
        x.expert_queries[i].a != y.expert_queries[i].a) {
      return false;
    }
  }
  return x.truncated == y.truncated && x.absent_queries == y.absent_queries;
}

int parse_error_line(const std::string& text) {
  try {
    parse_layout(text);
  } catch (const LayoutParseError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_SUITE("envs") {
  TEST_CASE("shipped layouts build 49 x 8 problems with stochastic rows") {
    for (int n = 1; n <= 4; ++n) {
      CAPTURE(n);
      const Gridworld world = make_gridworld(shipped(n), 0.95);
      CHECK(world.layout.n_states() == 49);
      CHECK(world.cmdp.n_states() == 49);
      CHECK(world.cmdp.n_actions() == kGridActions);
      CHECK(world.warnings.empty());
      const Vector sums = world.cmdp.transition().rowwise().sum();
      CHECK((sums.array() - 1.0).abs().maxCoeff() <= 1e-12);
      CHECK(world.true_cost == world.cmdp.cost());
      CHECK(world.cmdp.mu0()(world.layout.state(world.layout.start)) == 1.0);
    }
  }

  TEST_CASE("zero slip gives a deterministic kernel") {
    GridLayout layout = shipped(1);
    layout.slip = 0.0;
    const Gridworld world = make_gridworld(layout, 0.95);
    const Matrix& p = world.cmdp.transition();
    for (int i = 0; i < p.rows(); ++i) CHECK(p.row(i).maxCoeff() == 1.0);
  }

  TEST_CASE("two-cell corridor: only the east move reaches the goal") {
    const Gridworld world = make_gridworld(parse_layout("2 1 0 5\nSG\n"), 0.9);
    const int start = 0;
    const int goal = 1;
    int reaching = 0;
    for (int a = 0; a < kGridActions; ++a) {
      if (world.cmdp.p(start, a, goal) == 1.0) {
        ++reaching;
        CHECK(a == static_cast<int>(Move::E));
        CHECK(world.cmdp.reward()(start, a) == 1.0);
      } else {
        CHECK(world.cmdp.p(start, a, start) == 1.0);
        CHECK(world.cmdp.reward()(start, a) == 0.0);
      }
    }
    CHECK(reaching == 1);
    for (int a = 0; a < kGridActions; ++a) {
      CHECK(world.cmdp.p(goal, a, goal) == 1.0);
      CHECK(world.cmdp.reward()(goal, a) == 0.0);
    }
  }

  TEST_CASE("corner cells have three viable directions") {
    const Gridworld world = make_gridworld(parse_layout("3 3 0.3 10\n..G\n...\nS..\n"), 0.9);
    const int corner = 0;
    const int north = 3, east = 1, north_east = 4;
    CHECK(world.cmdp.p(corner, 0, north) == doctest::Approx(0.7 + 0.1));
    CHECK(world.cmdp.p(corner, 0, east) == doctest::Approx(0.1));
    CHECK(world.cmdp.p(corner, 0, north_east) == doctest::Approx(0.1));
  }

  TEST_CASE("slip draws avoid constrained cells; entering one costs") {
    const Gridworld world = make_gridworld(parse_layout("3 3 0.3 10\n..G\n#..\nS..\n"), 0.9);
    const int corner = 0;
    const int north = 3, east = 1, north_east = 4;
    CHECK(world.cmdp.cost()(corner, static_cast<int>(Move::N)) == 1.0);
    CHECK(world.cmdp.cost()(corner, static_cast<int>(Move::E)) == 0.0);
    // Intended N is blocked from the slip set but still taken w.p. 0.7 plus its slip share.
    CHECK(world.cmdp.p(corner, 0, north) == doctest::Approx(0.7 + 0.1));
    CHECK(world.cmdp.p(corner, static_cast<int>(Move::E), north) == 0.0);
    CHECK(world.cmdp.p(corner, static_cast<int>(Move::E), east) == doctest::Approx(0.7 + 0.15));
    CHECK(world.cmdp.p(corner, static_cast<int>(Move::E), north_east) == doctest::Approx(0.15));
  }

  TEST_CASE("empirical next-state frequencies match the kernel") {
    const Gridworld world = make_gridworld(shipped(1), 0.95);
    const int s = world.layout.state(Cell{3, 1});
    const int a = static_cast<int>(Move::SE);
    Rng rng(2024);
    const int n = 1000000;
    Vector freq = Vector::Zero(49);
    for (int i = 0; i < n; ++i) freq(sample_next(world.cmdp, s, a, rng)) += 1.0;
    freq /= n;
    for (int next = 0; next < 49; ++next) {
      const double p = world.cmdp.p(s, a, next);
      const double se = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(freq(next) - p) <= 3.0 * se);
    }
  }

  TEST_CASE("expert policies never pay cost on the shipped layouts") {
    for (int n = 1; n <= 4; ++n) {
      CAPTURE(n);
      const Gridworld world = make_gridworld(shipped(n), 0.95);
      const SafeSolution sol = solve_cmdp(world.cmdp);
      CHECK(sol.cost_value(world.cmdp.mu0()) == 0.0);
      const ExpertOracle expert{sol.policy, sol.dead};
      Rng env(n), pol(10 + n), exp(20 + n);
      double total_cost = 0.0;
      for (int e = 0; e < 10000; ++e) {
        const EpisodeRecord rec = run_episode(world.cmdp, sol.policy, world.layout.horizon,
                                              EpisodeStreams{env, pol, exp}, expert);
        for (const Step& st : rec.steps) total_cost += st.c;
      }
      CHECK(total_cost == 0.0);
    }
  }

  TEST_CASE("episodes: horizon, recorded signals, expert queries") {
    const Gridworld world = make_gridworld(shipped(2), 0.95);
    const SafeSolution sol = solve_cmdp(world.cmdp);
    const ExpertOracle expert{sol.policy, sol.dead};
    Rng env(1), pol(2), exp(3);
    const Policy uniform = Policy::uniform(49, 8);

    const EpisodeRecord one = run_episode(world.cmdp, uniform, 1, {env, pol, exp}, expert);
    CHECK(one.steps.size() == 1);
    CHECK(one.steps[0].s == world.layout.state(world.layout.start));

    for (int e = 0; e < 50; ++e) {
      const EpisodeRecord rec = run_episode(world.cmdp, uniform, 30, {env, pol, exp}, expert);
      CHECK(rec.steps.size() == 30);
      std::vector<bool> seen(49, false);
      int distinct = 0;
      for (std::size_t t = 0; t < rec.steps.size(); ++t) {
        const Step& st = rec.steps[t];
        CHECK(st.r == world.cmdp.reward()(st.s, st.a));
        CHECK(st.c == world.cmdp.cost()(st.s, st.a));
        if (t + 1 < rec.steps.size()) CHECK(rec.steps[t + 1].s == st.next);
        if (!seen[st.s]) {
          seen[st.s] = true;
          ++distinct;
        }
      }
      CHECK(rec.expert_queries.size() + rec.absent_queries.size() ==
            static_cast<std::size_t>(distinct));
      for (const auto& q : rec.expert_queries) CHECK(sol.policy(q.s, q.a) == 1.0);
      CHECK(rec.transitions().size() == rec.steps.size());
    }
  }

  TEST_CASE("absorbing start loops in place for the whole horizon") {
    const Cmdp loop(Matrix::Ones(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 2), 0.0,
                    Vector::Ones(1), 0.9, 1.0, 1.0);
    const ExpertOracle expert{Policy::uniform(1, 2), {false}};
    Rng env(1), pol(2), exp(3);
    const EpisodeRecord rec = run_episode(loop, Policy::uniform(1, 2), 7, {env, pol, exp}, expert);
    CHECK(rec.steps.size() == 7);
    for (const Step& st : rec.steps) {
      CHECK(st.s == 0);
      CHECK(st.next == 0);
    }
    CHECK(rec.expert_queries.size() == 1);
  }

  TEST_CASE("dead-state expert queries are recorded as absent") {
    const Cmdp loop(Matrix::Ones(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 2), 0.0,
                    Vector::Ones(1), 0.9, 1.0, 1.0);
    const ExpertOracle expert{Policy::uniform(1, 2), {true}};
    Rng env(1), pol(2), exp(3);
    const EpisodeRecord rec = run_episode(loop, Policy::uniform(1, 2), 3, {env, pol, exp}, expert);
    CHECK(rec.expert_queries.empty());
    CHECK(rec.absent_queries == std::vector<int>{0});
  }

  TEST_CASE("episodes are reproducible under fixed seeds") {
    const Gridworld world = make_gridworld(shipped(3), 0.95);
    const SafeSolution sol = solve_cmdp(world.cmdp);
    const ExpertOracle expert{sol.policy, sol.dead};
    auto roll = [&] {
      Rng env(5), pol(6), exp(7);
      return run_episode(world.cmdp, Policy::uniform(49, 8), 50, {env, pol, exp}, expert);
    };
    CHECK(same_record(roll(), roll()));
  }

  TEST_CASE("generative access is refused unless enabled") {
    const Gridworld world = make_gridworld(shipped(1), 0.95);
    const SafeSolution sol = solve_cmdp(world.cmdp);
    const ExpertOracle expert{sol.policy, sol.dead};
    Rng rng(1);
    const GenerativeModel closed(world.cmdp, expert, false);
    CHECK_THROWS_AS(closed.sample(0, 0, rng), std::logic_error);
    CHECK_THROWS_AS(closed.query_expert(0, rng), std::logic_error);
    const GenerativeModel open(world.cmdp, expert, true);
    const Transition t = open.sample(3, 2, rng);
    CHECK(t.s == 3);
    CHECK(t.a == 2);
    CHECK(world.cmdp.p(3, 2, t.next) > 0.0);
  }

  TEST_CASE("layout text round-trips") {
    for (int n = 1; n <= 4; ++n) {
      const GridLayout layout = shipped(n);
      CHECK(parse_layout(serialize_layout(layout)) == layout);
    }
    const GridLayout small = parse_layout("4 2 0.125 9\n.#.G\nS...\n");
    CHECK(small.width == 4);
    CHECK(small.height == 2);
    CHECK(small.start == Cell{0, 0});
    CHECK(small.goal == Cell{1, 3});
    CHECK(small.constrained == std::vector<Cell>{Cell{1, 1}});
    CHECK(small.slip == 0.125);
    CHECK(small.horizon == 9);
    CHECK(serialize_layout(small) == "4 2 0.125 9\n.#.G\nS...\n");
  }

  TEST_CASE("layout parse errors carry line and column") {
    try {
      parse_layout("3 2 0 5\nS.G\n.S.\n");
      FAIL("expected a parse error");
    } catch (const LayoutParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 2);
    }
    CHECK(parse_error_line("3 2 0 5\nS.G\nGG.\n") == 3);
    CHECK(parse_error_line("3 2 0 5\nS.G\n..\n") == 3);
    CHECK(parse_error_line("3 2 0 5\nS.G\n") == 3);
    CHECK(parse_error_line("3 2 0 5\nS.x\n..G\n") == 2);
    CHECK(parse_error_line("3 2 zero 5\nS..\n..G\n") == 1);
    CHECK(parse_error_line("3 1 1.0 5\nS.G\n") == 1);
    CHECK(parse_error_line("3 1 0 0\nS.G\n") == 1);
    CHECK(parse_error_line("3 1 0 5\n...\n") == 2);
    CHECK_THROWS(load_layout(ICRL_ENV_DIR "/does_not_exist.txt"));
  }

  TEST_CASE("layout invariants") {
    GridLayout layout = parse_layout("3 1 0 5\nS.G\n");
    CHECK_NOTHROW(layout.validate());
    layout.constrained.push_back(layout.start);
    CHECK_THROWS_AS(layout.validate(), std::invalid_argument);
    layout = parse_layout("3 1 0 5\nS.G\n");
    layout.goal = layout.start;
    CHECK_THROWS_AS(layout.validate(), std::invalid_argument);
  }

  TEST_CASE("unreachable goal is a warning") {
    const Gridworld world = make_gridworld(parse_layout("3 3 0 10\n..G\n###\nS..\n"), 0.9);
    CHECK_FALSE(world.warnings.empty());
  }
}
