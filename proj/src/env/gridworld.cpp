#include "mql/env/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mql {

Gridworld::Gridworld(int horizon) {
  if (horizon < 1) throw std::invalid_argument("Gridworld: horizon must be >= 1");
  spec_.obs_dim = kCells;
  spec_.action_kind = DiscreteActions{4};
  spec_.horizon = horizon;
}

Obs Gridworld::observation(int row, int col) {
  Obs o = Obs::Zero(kCells);
  o(cell_index(row, col)) = 1.0;
  return o;
}

Obs Gridworld::reset(std::uint64_t /*seed*/) {
  row_ = 0;
  col_ = 0;
  steps_ = 0;
  return observation(row_, col_);
}

void Gridworld::set_cell(int row, int col) {
  if (row < 0 || row >= kSize || col < 0 || col >= kSize) throw std::invalid_argument("Gridworld: cell out of range");
  row_ = row;
  col_ = col;
}

std::tuple<int, double, bool> Gridworld::transition(int cell, int move) {
  int row = cell / kSize, col = cell % kSize;
  switch (move) {
    case up: row = std::max(row - 1, 0); break;
    case down: row = std::min(row + 1, kSize - 1); break;
    case left: col = std::max(col - 1, 0); break;
    case right: col = std::min(col + 1, kSize - 1); break;
    default: throw std::invalid_argument("Gridworld: action out of range");
  }
  const int next = cell_index(row, col);
  const bool goal = is_goal(next);
  return {next, goal ? kGoalReward : kStepReward, goal};
}

StepResult Gridworld::step(const Action& action) {
  const int* move = std::get_if<int>(&action);
  if (!move || *move < 0 || *move >= 4) throw std::invalid_argument("Gridworld: action out of range");
  const auto [next, reward, goal] = transition(cell_index(row_, col_), *move);
  row_ = next / kSize;
  col_ = next % kSize;
  ++steps_;
  StepResult res;
  res.next_state = observation(row_, col_);
  res.reward = reward;
  res.done = goal;
  res.truncated = !goal && steps_ >= spec_.horizon;
  return res;
}

std::vector<std::array<double, 4>> gridworld_optimal_q(double gamma, double tol) {
  std::vector<std::array<double, 4>> q(Gridworld::kCells, {0.0, 0.0, 0.0, 0.0});
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0.0;
    auto next_q = q;
    for (int cell = 0; cell < Gridworld::kCells; ++cell) {
      if (Gridworld::is_goal(cell)) continue;
      for (int a = 0; a < 4; ++a) {
        const auto [next, r, terminal] = Gridworld::transition(cell, a);
        const double v_next = terminal ? 0.0 : *std::max_element(q[next].begin(), q[next].end());
        next_q[cell][a] = r + gamma * v_next;
        delta = std::max(delta, std::abs(next_q[cell][a] - q[cell][a]));
      }
    }
    q = std::move(next_q);
    if (delta < tol) break;
  }
  return q;
}

bool gridworld_is_optimal_move(const std::vector<std::array<double, 4>>& q, int cell, int move, double tol) {
  const double best = *std::max_element(q[cell].begin(), q[cell].end());
  return q[cell][move] >= best - tol;
}

}  // namespace mql
