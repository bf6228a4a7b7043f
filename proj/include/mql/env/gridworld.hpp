#pragma once

#include <array>
#include <tuple>
#include <vector>

#include "mql/env/environment.hpp"

namespace mql {

/// 5x5 deterministic grid. Start (0,0), goal (4,4). Walls clip moves.
/// Observation is a one-hot over the 25 cells.
class Gridworld final : public Environment {
 public:
  static constexpr int kSize = 5;
  static constexpr int kCells = kSize * kSize;
  static constexpr int kGoalRow = 4, kGoalCol = 4;
  static constexpr double kStepReward = -0.01;
  static constexpr double kGoalReward = 1.0;
  enum Move : int { up = 0, down = 1, left = 2, right = 3 };

  explicit Gridworld(int horizon = 100);

  const EnvSpec& spec() const override { return spec_; }
  Obs reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Gridworld>(*this); }
  std::string name() const override { return "gridworld"; }

  void set_cell(int row, int col);
  int row() const { return row_; }
  int col() const { return col_; }

  static int cell_index(int row, int col) { return row * kSize + col; }
  static Obs observation(int row, int col);
  static bool is_goal(int cell) { return cell == cell_index(kGoalRow, kGoalCol); }
  /// Deterministic model: (next cell, reward, terminal) for (cell, move).
  static std::tuple<int, double, bool> transition(int cell, int move);

 private:
  EnvSpec spec_;
  int row_ = 0, col_ = 0;
  int steps_ = 0;
};

/// Exact optimal action values by value iteration on the known model.
/// q[cell][move]; terminal goal row is zero.
std::vector<std::array<double, 4>> gridworld_optimal_q(double gamma, double tol = 1e-14);

/// True iff `move` attains max_a q[cell][a] within `tol`.
bool gridworld_is_optimal_move(const std::vector<std::array<double, 4>>& q, int cell, int move, double tol = 1e-9);

}  // namespace mql
