#include "icrl/envs.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace icrl {

void GridLayout::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("layout: empty grid");
  if (!on_grid(start)) throw std::invalid_argument("layout: start is off the grid");
  if (!on_grid(goal)) throw std::invalid_argument("layout: goal is off the grid");
  if (goal == start) throw std::invalid_argument("layout: goal coincides with start");
  if (!(slip >= 0.0 && slip < 1.0)) throw std::invalid_argument("layout: slip must lie in [0, 1)");
  if (horizon < 1) throw std::invalid_argument("layout: horizon must be >= 1");
  for (const Cell& c : constrained) {
    if (!on_grid(c)) throw std::invalid_argument("layout: constrained cell off the grid");
    if (c == start) throw std::invalid_argument("layout: start is constrained");
    if (c == goal) throw std::invalid_argument("layout: goal is constrained");
  }
}

bool GridLayout::is_constrained(Cell c) const {
  return std::find(constrained.begin(), constrained.end(), c) != constrained.end();
}

namespace {

Cell shifted(Cell c, int move) {
  return Cell{c.row + kMoveOffsets[move][0], c.col + kMoveOffsets[move][1]};
}

// Start can reach the goal under some policy (support of P, any action).
// Reachability through moves that never aim at a constrained cell.
bool goal_reachable(const GridLayout& layout, const Matrix& transition, const Matrix& cost,
                    int n_actions) {
  const int S = layout.n_states();
  std::vector<bool> seen(static_cast<std::size_t>(S), false);
  std::queue<int> frontier;
  const int start = layout.state(layout.start);
  frontier.push(start);
  seen[start] = true;
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int a = 0; a < n_actions; ++a) {
      if (cost(s, a) > 0.0) continue;
      const auto row = transition.row(sa_index(s, a, n_actions));
      for (int next = 0; next < S; ++next) {
        if (row(next) > 0.0 && !seen[next]) {
          seen[next] = true;
          frontier.push(next);
        }
      }
    }
  }
  return seen[layout.state(layout.goal)];
}

}  // namespace

Gridworld make_gridworld(const GridLayout& layout, double gamma, double r_max, double c_max) {
  layout.validate();
  const int S = layout.n_states();
  const int A = kGridActions;
  const int goal = layout.state(layout.goal);
  Matrix transition = Matrix::Zero(S * A, S);
  Matrix reward = Matrix::Zero(S, A);
  Matrix cost = Matrix::Zero(S, A);

  for (int s = 0; s < S; ++s) {
    const Cell here = layout.cell(s);
    if (s == goal) {
      for (int a = 0; a < A; ++a) transition(sa_index(s, a, A), s) = 1.0;
      continue;
    }
    std::vector<int> safe_moves;
    for (int m = 0; m < A; ++m) {
      const Cell to = shifted(here, m);
      if (layout.on_grid(to) && !layout.is_constrained(to)) safe_moves.push_back(m);
    }
    for (int a = 0; a < A; ++a) {
      auto row = transition.row(sa_index(s, a, A));
      const Cell intended = shifted(here, a);
      const bool intended_ok = layout.on_grid(intended);
      row(intended_ok ? layout.state(intended) : s) += 1.0 - layout.slip;

      std::vector<int> slip_moves = safe_moves;
      if (intended_ok && std::find(slip_moves.begin(), slip_moves.end(), a) == slip_moves.end()) {
        slip_moves.push_back(a);
      }
      if (slip_moves.empty()) {
        row(s) += layout.slip;
      } else {
        const double share = layout.slip / static_cast<double>(slip_moves.size());
        for (int m : slip_moves) row(layout.state(shifted(here, m))) += share;
      }
      reward(s, a) = r_max * row(goal);
      if (intended_ok && layout.is_constrained(intended)) cost(s, a) = 1.0;
    }
  }

  Vector mu0 = Vector::Zero(S);
  mu0(layout.state(layout.start)) = 1.0;
  Gridworld world{layout, Cmdp(transition, reward, cost, 0.0, mu0, gamma, r_max, c_max), cost, {}};
  if (!goal_reachable(layout, transition, cost, A)) {
    world.warnings.push_back("goal is not reachable from start without entering a constrained cell");
  }
  return world;
}

// ---------------------------------------------------------------------------
// Layout text

LayoutParseError::LayoutParseError(const std::string& what, int line, int column)
    : std::runtime_error("layout:" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                         what),
      line_(line),
      column_(column) {}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? end : end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string_view::npos) {
    lines.pop_back();
  }
  return lines;
}

template <typename T>
T parse_field(std::string_view header, std::size_t& pos, const char* name) {
  while (pos < header.size() && (header[pos] == ' ' || header[pos] == '\t')) ++pos;
  const int column = static_cast<int>(pos) + 1;
  if (pos >= header.size()) throw LayoutParseError(std::string("missing ") + name, 1, column);
  T value{};
  const auto [ptr, ec] = std::from_chars(header.data() + pos, header.data() + header.size(), value);
  const std::size_t consumed = static_cast<std::size_t>(ptr - (header.data() + pos));
  if (ec != std::errc() || (pos + consumed < header.size() && header[pos + consumed] != ' ' &&
                            header[pos + consumed] != '\t')) {
    throw LayoutParseError(std::string("bad ") + name, 1, column);
  }
  pos += consumed;
  return value;
}

std::string shortest(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

GridLayout parse_layout(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw LayoutParseError("empty layout", 1, 1);

  GridLayout layout;
  std::size_t pos = 0;
  layout.width = parse_field<int>(lines[0], pos, "width");
  layout.height = parse_field<int>(lines[0], pos, "height");
  layout.slip = parse_field<double>(lines[0], pos, "slip");
  layout.horizon = parse_field<int>(lines[0], pos, "horizon");
  if (lines[0].find_first_not_of(" \t", pos) != std::string_view::npos) {
    throw LayoutParseError("trailing text in header", 1, static_cast<int>(pos) + 1);
  }
  if (layout.width <= 0) throw LayoutParseError("width must be positive", 1, 1);
  if (layout.height <= 0) throw LayoutParseError("height must be positive", 1, 1);
  if (!(layout.slip >= 0.0 && layout.slip < 1.0)) {
    throw LayoutParseError("slip must lie in [0, 1)", 1, 1);
  }
  if (layout.horizon < 1) throw LayoutParseError("horizon must be >= 1", 1, 1);

  const int grid_lines = static_cast<int>(lines.size()) - 1;
  if (grid_lines != layout.height) {
    throw LayoutParseError("expected " + std::to_string(layout.height) + " grid rows, found " +
                               std::to_string(grid_lines),
                           static_cast<int>(lines.size()) + (grid_lines < layout.height ? 1 : 0),
                           1);
  }
  bool have_start = false;
  bool have_goal = false;
  for (int i = 0; i < layout.height; ++i) {
    const int line_no = i + 2;
    std::string_view row_text = lines[static_cast<std::size_t>(i) + 1];
    while (!row_text.empty() && (row_text.back() == ' ' || row_text.back() == '\t')) {
      row_text.remove_suffix(1);
    }
    if (static_cast<int>(row_text.size()) != layout.width) {
      throw LayoutParseError("row has " + std::to_string(row_text.size()) + " cells, expected " +
                                 std::to_string(layout.width),
                             line_no, static_cast<int>(std::min<std::size_t>(
                                          row_text.size(), static_cast<std::size_t>(layout.width))) +
                                          1);
    }
    const int row = layout.height - 1 - i;
    for (int col = 0; col < layout.width; ++col) {
      const Cell cell{row, col};
      switch (row_text[static_cast<std::size_t>(col)]) {
        case '.':
          break;
        case '#':
          layout.constrained.push_back(cell);
          break;
        case 'S':
          if (have_start) throw LayoutParseError("second start cell", line_no, col + 1);
          have_start = true;
          layout.start = cell;
          break;
        case 'G':
          if (have_goal) throw LayoutParseError("second goal cell", line_no, col + 1);
          have_goal = true;
          layout.goal = cell;
          break;
        default:
          throw LayoutParseError(std::string("unexpected character '") +
                                     row_text[static_cast<std::size_t>(col)] + "'",
                                 line_no, col + 1);
      }
    }
  }
  if (!have_start) throw LayoutParseError("no start cell", 2, 1);
  if (!have_goal) throw LayoutParseError("no goal cell", 2, 1);
  std::sort(layout.constrained.begin(), layout.constrained.end(),
            [](Cell a, Cell b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  return layout;
}

std::string serialize_layout(const GridLayout& layout) {
  layout.validate();
  std::ostringstream out;
  out << layout.width << ' ' << layout.height << ' ' << shortest(layout.slip) << ' '
      << layout.horizon << '\n';
  for (int row = layout.height - 1; row >= 0; --row) {
    for (int col = 0; col < layout.width; ++col) {
      const Cell cell{row, col};
      char ch = '.';
      if (cell == layout.start) {
        ch = 'S';
      } else if (cell == layout.goal) {
        ch = 'G';
      } else if (layout.is_constrained(cell)) {
        ch = '#';
      }
      out << ch;
    }
    out << '\n';
  }
  return out.str();
}

GridLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open layout file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_layout(text.str());
  } catch (const LayoutParseError& e) {
    throw LayoutParseError(path + ": " + e.what(), e.line(), e.column());
  }
}

// ---------------------------------------------------------------------------
// Interaction

std::optional<int> ExpertOracle::query(int s, Rng& rng) const {
  if (!dead.empty() && dead[static_cast<std::size_t>(s)]) return std::nullopt;
  return policy.sample(s, rng);
}

std::vector<Transition> EpisodeRecord::transitions() const {
  std::vector<Transition> out;
  out.reserve(steps.size());
  for (const Step& st : steps) out.push_back(Transition{st.s, st.a, st.next});
  return out;
}

int sample_next(const Cmdp& cmdp, int s, int a, Rng& rng) {
  const auto row = cmdp.transition().row(sa_index(s, a, cmdp.n_actions()));
  return rng.categorical(row, cmdp.n_states());
}

EpisodeRecord run_episode(const Cmdp& cmdp, const ActionSelector& select, int steps,
                          EpisodeStreams rngs, const ExpertOracle& expert) {
  if (steps < 1) throw std::invalid_argument("run_episode: need at least one step");
  const int S = cmdp.n_states();
  const int A = cmdp.n_actions();
  EpisodeRecord record;
  record.steps.reserve(static_cast<std::size_t>(steps));
  std::vector<bool> queried(static_cast<std::size_t>(S), false);

  int s = rngs.env.categorical(cmdp.mu0(), S);
  for (int t = 0; t < steps; ++t) {
    if (!queried[s]) {
      queried[s] = true;
      if (const auto a_e = expert.query(s, rngs.expert)) {
        record.expert_queries.push_back(ExpertObservation{s, *a_e});
      } else {
        record.absent_queries.push_back(s);
      }
    }
    const int a = select(s, t);
    if (a < 0 || a >= A) throw std::out_of_range("run_episode: selected action out of range");
    const int next = sample_next(cmdp, s, a, rngs.env);
    record.steps.push_back(Step{s, a, cmdp.reward()(s, a), cmdp.cost()(s, a), next});
    s = next;
  }
  return record;
}

EpisodeRecord run_episode(const Cmdp& cmdp, const Policy& policy, int steps, EpisodeStreams rngs,
                          const ExpertOracle& expert) {
  Rng& policy_rng = rngs.policy;
  return run_episode(
      cmdp, [&](int s, int) { return policy.sample(s, policy_rng); }, steps, rngs, expert);
}

void GenerativeModel::require_access() const {
  if (!enabled_) {
    throw std::logic_error("generative access is disabled for this environment");
  }
}

Transition GenerativeModel::sample(int s, int a, Rng& rng) const {
  require_access();
  if (s < 0 || s >= cmdp_->n_states() || a < 0 || a >= cmdp_->n_actions()) {
    throw std::out_of_range("GenerativeModel: pair out of range");
  }
  return Transition{s, a, sample_next(*cmdp_, s, a, rng)};
}

std::optional<int> GenerativeModel::query_expert(int s, Rng& rng) const {
  require_access();
  return expert_->query(s, rng);
}

}  // namespace icrl
