#pragma once

#include <numbers>

#include "mql/env/environment.hpp"
#include "mql/numcore/random.hpp"

namespace mql {

struct PendulumState {
  double theta = 0.0;      // radians, wrapped to (-pi, pi]
  double theta_dot = 0.0;  // rad/s, clipped to [-8, 8]
  int upright_counter = 0;
};

/// Rigid pendulum, theta = 0 upright. Observation (cos, sin, theta_dot),
/// action in [-1, 1] scaled to torque u = 2 * action.
///
/// Dense reward: -(theta^2 + 0.1 theta_dot^2 + 0.001 u^2) on the pre-step state.
/// Sparse reward: 0 until the rod has stayed within |theta| < pi/3 for 100
/// consecutive steps, then +1 on every further upright step.
class Pendulum final : public Environment {
 public:
  enum class Reward { dense, sparse };

  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kUprightHalfWidth = std::numbers::pi / 3.0;
  static constexpr int kUprightSteps = 100;

  explicit Pendulum(Reward reward, int horizon = 200);

  const EnvSpec& spec() const override { return spec_; }
  Obs reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Pendulum>(*this); }
  std::string name() const override { return reward_ == Reward::dense ? "pendulum" : "pendulum-sparse"; }

  const PendulumState& state() const { return state_; }
  void set_state(double theta, double theta_dot);
  Obs observation() const;

 private:
  EnvSpec spec_;
  Reward reward_;
  PendulumState state_;
  int steps_ = 0;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

}  // namespace mql
