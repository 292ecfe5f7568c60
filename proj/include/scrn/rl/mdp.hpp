#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scrn/linalg.hpp"

namespace scrn::rl {

/// Grid cell codes used by the ASCII layout.
enum class Cell : char { Free = '.', Block = '#', Start = 'S', Goal = 'G', Cliff = 'C' };

struct GridLayout {
  int rows = 0;
  int cols = 0;
  std::vector<Cell> cells;  // row-major, row 0 at the top

  Cell at(int r, int c) const { return cells[static_cast<std::size_t>(r * cols + c)]; }
  Cell& at(int r, int c) { return cells[static_cast<std::size_t>(r * cols + c)]; }

  /// One line per row; throws BadSpec on ragged rows or unknown characters.
  static GridLayout parse(const std::string& ascii);
  std::string to_ascii() const;
};

struct GridRewards {
  double step = -0.1;   // ordinary move
  double bump = -0.1;   // move into a block or off the grid (agent stays)
  double cliff = -100;  // move into a cliff cell (terminal)
  double goal = 100;    // move into the goal (terminal)
};

/// Finite MDP with dense transitions P(s'|s,a), reward R(s,a), start
/// distribution ρ, discount γ and truncation horizon H. Entering a terminal
/// state ends the episode.
class TabularMdp {
 public:
  TabularMdp(int n_states, int n_actions, std::vector<double> transition, Mat reward, Vec start_dist,
             double discount, int horizon, std::vector<bool> terminal, std::vector<bool> goal);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  Eigen::Index param_dim() const { return static_cast<Eigen::Index>(n_states_) * n_actions_; }
  double transition(int s, int a, int next) const;
  double reward(int s, int a) const { return reward_(s, a); }
  const Mat& reward_table() const { return reward_; }
  const Vec& start_dist() const { return start_; }
  double discount() const { return discount_; }
  int horizon() const { return horizon_; }
  bool terminal(int s) const { return terminal_[static_cast<std::size_t>(s)]; }
  bool goal(int s) const { return goal_[static_cast<std::size_t>(s)]; }
  double reward_bound() const { return reward_.cwiseAbs().maxCoeff(); }

  /// Nonzero entries of P(·|s,a).
  const std::vector<std::pair<int, double>>& successors(int s, int a) const {
    return successors_[static_cast<std::size_t>(s * n_actions_ + a)];
  }

  TabularMdp with_horizon(int horizon) const;
  TabularMdp with_discount(double discount) const;

  /// Present for grid-built MDPs; state index = r·cols + c.
  const std::optional<GridLayout>& layout() const { return layout_; }
  void set_layout(GridLayout layout) { layout_ = std::move(layout); }

 private:
  int n_states_;
  int n_actions_;
  std::vector<double> transition_;  // [(s·A + a)·S + s']
  Mat reward_;
  Vec start_;
  double discount_;
  int horizon_;
  std::vector<bool> terminal_;
  std::vector<bool> goal_;
  std::vector<std::vector<std::pair<int, double>>> successors_;
  std::optional<GridLayout> layout_;
};

/// Deterministic grid world with actions up, right, down, left.
TabularMdp grid_mdp(const GridLayout& layout, const GridRewards& rewards, int horizon, double discount);

inline constexpr double kDefaultDiscount = 0.99;

/// 4×12 cliff walking: start bottom-left, goal bottom-right, cliff between;
/// step −0.1, cliff −100, goal +100, 100-step episodes.
TabularMdp build_cliff_walking(double discount = kDefaultDiscount);

enum class MazeKind { RandomMaze, RandomShapeMaze };

/// 10×10 maze with start top-left and goal bottom-right. RandomMaze blocks
/// cells iid at density 0.25; RandomShapeMaze drops rectangles of 2–4 cells
/// until a quarter of the grid is blocked. Layouts without a start→goal path
/// are redrawn, up to 100 attempts (GenerationFailed).
TabularMdp build_random_maze(MazeKind kind, std::uint64_t seed, double discount = kDefaultDiscount);

/// Breadth-first search over free cells (cliff cells count as impassable).
bool grid_connected(const GridLayout& layout);

}  // namespace scrn::rl
