#include "scrn/rl/mdp.hpp"

#include <cmath>
#include <queue>
#include <random>
#include <sstream>

namespace scrn::rl {

GridLayout GridLayout::parse(const std::string& ascii) {
  GridLayout out;
  std::istringstream in(ascii);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (out.cols == 0) out.cols = static_cast<int>(line.size());
    if (static_cast<int>(line.size()) != out.cols) throw Error(ErrorCode::BadSpec, "ragged grid rows");
    for (char ch : line) {
      switch (ch) {
        case '.': case '#': case 'S': case 'G': case 'C': out.cells.push_back(static_cast<Cell>(ch)); break;
        default: throw Error(ErrorCode::BadSpec, std::string("unknown grid character '") + ch + "'");
      }
    }
    ++out.rows;
  }
  if (out.rows == 0) throw Error(ErrorCode::BadSpec, "empty grid");
  return out;
}

std::string GridLayout::to_ascii() const {
  std::string out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out.push_back(static_cast<char>(at(r, c)));
    out.push_back('\n');
  }
  return out;
}

TabularMdp::TabularMdp(int n_states, int n_actions, std::vector<double> transition, Mat reward, Vec start_dist,
                       double discount, int horizon, std::vector<bool> terminal, std::vector<bool> goal)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      start_(std::move(start_dist)),
      discount_(discount),
      horizon_(horizon),
      terminal_(std::move(terminal)),
      goal_(std::move(goal)) {
  if (n_states < 1 || n_actions < 1) throw Error(ErrorCode::BadSpec, "need at least one state and action");
  const auto s_count = static_cast<std::size_t>(n_states);
  const auto sa = s_count * static_cast<std::size_t>(n_actions);
  if (transition_.size() != sa * s_count) throw Error(ErrorCode::DimMismatch, "transition tensor size");
  if (reward_.rows() != n_states || reward_.cols() != n_actions) {
    throw Error(ErrorCode::DimMismatch, "reward table shape");
  }
  if (start_.size() != n_states) throw Error(ErrorCode::DimMismatch, "start distribution size");
  if (terminal_.size() != s_count || goal_.size() != s_count) throw Error(ErrorCode::DimMismatch, "flag sizes");
  if (!(discount_ > 0 && discount_ < 1)) throw Error(ErrorCode::BadSpec, "discount must lie in (0, 1)");
  if (horizon_ < 1) throw Error(ErrorCode::BadSpec, "horizon must be >= 1");
  if (!reward_.allFinite()) throw Error(ErrorCode::NonFinite, "reward table");
  if ((start_.array() < 0).any() || std::abs(start_.sum() - 1) > 1e-12) {
    throw Error(ErrorCode::BadSpec, "start distribution must be a probability vector");
  }
  successors_.resize(sa);
  for (std::size_t k = 0; k < sa; ++k) {
    double total = 0;
    for (std::size_t next = 0; next < s_count; ++next) {
      const double p = transition_[k * s_count + next];
      if (!(p >= 0)) throw Error(ErrorCode::BadSpec, "negative transition probability");
      if (p > 0) successors_[k].emplace_back(static_cast<int>(next), p);
      total += p;
    }
    if (std::abs(total - 1) > 1e-12) throw Error(ErrorCode::BadSpec, "transition rows must sum to 1");
  }
}

double TabularMdp::transition(int s, int a, int next) const {
  if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_ || next < 0 || next >= n_states_) {
    throw Error(ErrorCode::IndexOutOfRange, "transition index");
  }
  return transition_[(static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + next];
}

TabularMdp TabularMdp::with_horizon(int horizon) const {
  TabularMdp copy = *this;
  if (horizon < 1) throw Error(ErrorCode::BadSpec, "horizon must be >= 1");
  copy.horizon_ = horizon;
  return copy;
}

TabularMdp TabularMdp::with_discount(double discount) const {
  TabularMdp copy = *this;
  if (!(discount > 0 && discount < 1)) throw Error(ErrorCode::BadSpec, "discount must lie in (0, 1)");
  copy.discount_ = discount;
  return copy;
}

namespace {

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

bool passable(Cell c) { return c != Cell::Block && c != Cell::Cliff; }

}  // namespace

TabularMdp grid_mdp(const GridLayout& layout, const GridRewards& rewards, int horizon, double discount) {
  const int n = layout.rows * layout.cols;
  if (n == 0 || static_cast<int>(layout.cells.size()) != n) throw Error(ErrorCode::BadSpec, "grid layout size");
  constexpr int kActions = 4;
  std::vector<double> transition(static_cast<std::size_t>(n) * kActions * n, 0.0);
  Mat reward = Mat::Zero(n, kActions);
  Vec start = Vec::Zero(n);
  std::vector<bool> terminal(static_cast<std::size_t>(n), false);
  std::vector<bool> goal(static_cast<std::size_t>(n), false);
  int starts = 0;
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      const int s = r * layout.cols + c;
      const Cell cell = layout.at(r, c);
      if (cell == Cell::Start) {
        start(s) = 1;
        ++starts;
      }
      terminal[static_cast<std::size_t>(s)] = cell == Cell::Goal || cell == Cell::Cliff;
      goal[static_cast<std::size_t>(s)] = cell == Cell::Goal;
      for (int a = 0; a < kActions; ++a) {
        const int nr = r + kDr[a];
        const int nc = c + kDc[a];
        int next = s;
        double rew = rewards.bump;
        if (nr >= 0 && nr < layout.rows && nc >= 0 && nc < layout.cols && layout.at(nr, nc) != Cell::Block) {
          next = nr * layout.cols + nc;
          const Cell target = layout.at(nr, nc);
          rew = target == Cell::Cliff ? rewards.cliff : target == Cell::Goal ? rewards.goal : rewards.step;
        }
        transition[(static_cast<std::size_t>(s) * kActions + a) * n + next] = 1.0;
        reward(s, a) = rew;
      }
    }
  }
  if (starts != 1) throw Error(ErrorCode::BadSpec, "grid needs exactly one start cell");
  TabularMdp mdp(n, kActions, std::move(transition), std::move(reward), std::move(start), discount, horizon,
                 std::move(terminal), std::move(goal));
  mdp.set_layout(layout);
  return mdp;
}

TabularMdp build_cliff_walking(double discount) {
  const GridLayout layout = GridLayout::parse(
      "............\n"
      "............\n"
      "............\n"
      "SCCCCCCCCCCG\n");
  GridRewards rewards;
  rewards.step = -0.1;
  rewards.bump = -0.1;
  rewards.cliff = -100;
  rewards.goal = 100;
  return grid_mdp(layout, rewards, 100, discount);
}

bool grid_connected(const GridLayout& layout) {
  int start = -1;
  for (int i = 0; i < static_cast<int>(layout.cells.size()); ++i) {
    if (layout.cells[static_cast<std::size_t>(i)] == Cell::Start) start = i;
  }
  if (start < 0) return false;
  std::vector<bool> seen(layout.cells.size(), false);
  std::queue<int> frontier;
  frontier.push(start);
  seen[static_cast<std::size_t>(start)] = true;
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    const int r = s / layout.cols;
    const int c = s % layout.cols;
    if (layout.at(r, c) == Cell::Goal) return true;
    for (int a = 0; a < 4; ++a) {
      const int nr = r + kDr[a];
      const int nc = c + kDc[a];
      if (nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols) continue;
      const int next = nr * layout.cols + nc;
      if (seen[static_cast<std::size_t>(next)] || !passable(layout.at(nr, nc))) continue;
      seen[static_cast<std::size_t>(next)] = true;
      frontier.push(next);
    }
  }
  return false;
}

namespace {

constexpr int kMazeSize = 10;
constexpr double kBlockDensity = 0.25;
constexpr int kMaxAttempts = 100;

GridLayout draw_maze(MazeKind kind, std::mt19937_64& rng) {
  GridLayout layout;
  layout.rows = layout.cols = kMazeSize;
  layout.cells.assign(kMazeSize * kMazeSize, Cell::Free);
  auto reserved = [](int r, int c) {
    return (r == 0 && c == 0) || (r == kMazeSize - 1 && c == kMazeSize - 1);
  };
  if (kind == MazeKind::RandomMaze) {
    std::bernoulli_distribution block(kBlockDensity);
    for (int r = 0; r < kMazeSize; ++r) {
      for (int c = 0; c < kMazeSize; ++c) {
        if (block(rng) && !reserved(r, c)) layout.at(r, c) = Cell::Block;
      }
    }
  } else {
    // rectangles of area 2–4: 1×2, 2×1, 1×3, 3×1, 2×2, 1×4, 4×1
    static constexpr int kShapes[7][2] = {{1, 2}, {2, 1}, {1, 3}, {3, 1}, {2, 2}, {1, 4}, {4, 1}};
    std::uniform_int_distribution<int> shape(0, 6);
    std::uniform_int_distribution<int> pos(0, kMazeSize - 1);
    const int target = static_cast<int>(kBlockDensity * kMazeSize * kMazeSize);
    int blocked = 0;
    for (int guard = 0; blocked < target && guard < 1000; ++guard) {
      const auto& sh = kShapes[shape(rng)];
      const int r0 = pos(rng);
      const int c0 = pos(rng);
      for (int dr = 0; dr < sh[0]; ++dr) {
        for (int dc = 0; dc < sh[1]; ++dc) {
          const int r = r0 + dr;
          const int c = c0 + dc;
          if (r >= kMazeSize || c >= kMazeSize || reserved(r, c) || layout.at(r, c) == Cell::Block) continue;
          layout.at(r, c) = Cell::Block;
          ++blocked;
        }
      }
    }
  }
  layout.at(0, 0) = Cell::Start;
  layout.at(kMazeSize - 1, kMazeSize - 1) = Cell::Goal;
  return layout;
}

}  // namespace

TabularMdp build_random_maze(MazeKind kind, std::uint64_t seed, double discount) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    GridLayout layout = draw_maze(kind, rng);
    if (!grid_connected(layout)) continue;
    GridRewards rewards;
    rewards.step = -0.1;
    rewards.bump = -1.0;
    rewards.goal = 1.0;
    return grid_mdp(layout, rewards, 200, discount);
  }
  throw Error(ErrorCode::GenerationFailed, "no connected maze after 100 attempts");
}

}  // namespace scrn::rl
