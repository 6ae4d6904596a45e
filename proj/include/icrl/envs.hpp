#pragma once

#include "icrl/cmdp.hpp"
#include "icrl/rng.hpp"

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace icrl {

struct Cell {
  int row = 0;  ///< vertical axis, 0 is the bottom row
  int col = 0;  ///< horizontal axis, 0 is the left column
  bool operator==(const Cell&) const = default;
};

struct GridLayout {
  int width = 0;
  int height = 0;
  Cell start;
  Cell goal;
  std::vector<Cell> constrained;
  double slip = 0.0;
  int horizon = 1;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  bool is_constrained(Cell c) const;
  bool on_grid(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  int n_states() const { return width * height; }
  int state(Cell c) const { return c.row * width + c.col; }
  Cell cell(int s) const { return Cell{s / width, s % width}; }
  bool operator==(const GridLayout&) const = default;
};

/// Eight moves in a fixed order.
enum class Move : int { N = 0, S, E, W, NE, NW, SE, SW };
inline constexpr int kGridActions = 8;
inline constexpr std::array<std::string_view, kGridActions> kMoveNames = {"N",  "S",  "E",  "W",
                                                                          "NE", "NW", "SE", "SW"};
/// (d_row, d_col) per move.
inline constexpr std::array<std::array<int, 2>, kGridActions> kMoveOffsets = {
    {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

struct Gridworld {
  GridLayout layout;
  Cmdp cmdp;          ///< budget 0, mu0 = start cell
  Matrix true_cost;   ///< same as cmdp.cost()
  std::vector<std::string> warnings;
};

/**
 * Builds the gridworld CMDP.
 *
 * A move lands on its intended cell with probability 1 - slip; otherwise the
 * agent moves in a uniformly drawn direction among the intended one and every
 * on-grid direction whose cell is not constrained. Off-grid intended moves
 * leave the agent in place. Entering the goal pays reward 1 (expected reward
 * per pair) and the goal absorbs. Attempting to move into a constrained cell
 * costs 1.
 */
Gridworld make_gridworld(const GridLayout& layout, double gamma, double r_max = 1.0,
                         double c_max = 1.0);

class LayoutParseError : public std::runtime_error {
 public:
  LayoutParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/**
 * Layout text: a header `W H slip horizon`, then H rows of W characters from
 * `.` (empty), `S` (start), `G` (goal), `#` (constrained). The last grid line
 * is row 0.
 */
GridLayout parse_layout(std::string_view text);
std::string serialize_layout(const GridLayout& layout);
GridLayout load_layout(const std::string& path);

/// Expert access: a policy plus the states where it is undefined.
struct ExpertOracle {
  Policy policy;
  std::vector<bool> dead;

  /// Draws a_E ~ piE(.|s); empty at dead states.
  std::optional<int> query(int s, Rng& rng) const;
};

struct Step {
  int s;
  int a;
  double r;
  double c;
  int next;
};

struct EpisodeRecord {
  std::vector<Step> steps;
  std::vector<ExpertObservation> expert_queries;
  std::vector<int> absent_queries;  ///< visited states with no expert action
  bool truncated = false;           ///< stopped by the caller's sample cap before the horizon

  std::vector<Transition> transitions() const;
};

/// Chooses the action at state s on step t.
using ActionSelector = std::function<int(int s, int t)>;

struct EpisodeStreams {
  Rng& env;
  Rng& policy;
  Rng& expert;
};

/**
 * Rolls out `steps` transitions from a start drawn from mu0. The goal
 * absorbs but does not end the episode. The expert is queried once at each
 * distinct visited state.
 */
EpisodeRecord run_episode(const Cmdp& cmdp, const ActionSelector& select, int steps,
                          EpisodeStreams rngs, const ExpertOracle& expert);
EpisodeRecord run_episode(const Cmdp& cmdp, const Policy& policy, int steps, EpisodeStreams rngs,
                          const ExpertOracle& expert);

/// Samples s' ~ P(.|s,a).
int sample_next(const Cmdp& cmdp, int s, int a, Rng& rng);

/// Arbitrary (s,a) and expert queries; refused unless generative access is enabled.
class GenerativeModel {
 public:
  GenerativeModel(const Cmdp& cmdp, const ExpertOracle& expert, bool enabled)
      : cmdp_(&cmdp), expert_(&expert), enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  const Cmdp& cmdp() const { return *cmdp_; }
  Transition sample(int s, int a, Rng& rng) const;
  std::optional<int> query_expert(int s, Rng& rng) const;

 private:
  void require_access() const;
  const Cmdp* cmdp_;
  const ExpertOracle* expert_;
  bool enabled_;
};

}  // namespace icrl
