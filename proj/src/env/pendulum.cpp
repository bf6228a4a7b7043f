#include "mql/env/pendulum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mql {

double wrap_angle(double theta) {
  constexpr double pi = std::numbers::pi;
  double w = std::fmod(theta + pi, 2.0 * pi);
  if (w <= 0.0) w += 2.0 * pi;
  return w - pi;
}

Pendulum::Pendulum(Reward reward, int horizon) : reward_(reward) {
  if (horizon < 1) throw std::invalid_argument("Pendulum: horizon must be >= 1");
  spec_.obs_dim = 3;
  spec_.action_kind = ContinuousActions{1};
  spec_.horizon = horizon;
}

Obs Pendulum::observation() const {
  Obs o(3);
  o << std::cos(state_.theta), std::sin(state_.theta), state_.theta_dot;
  return o;
}

Obs Pendulum::reset(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(-1.0, 1.0);
  state_.theta = wrap_angle(angle(rng));
  state_.theta_dot = speed(rng);
  state_.upright_counter = 0;
  steps_ = 0;
  return observation();
}

void Pendulum::set_state(double theta, double theta_dot) {
  state_.theta = wrap_angle(theta);
  state_.theta_dot = std::clamp(theta_dot, -kMaxSpeed, kMaxSpeed);
}

StepResult Pendulum::step(const Action& action) {
  const auto* vec = std::get_if<Eigen::VectorXd>(&action);
  if (!vec || vec->size() != 1) throw std::invalid_argument("Pendulum: expected a 1-d continuous action");
  const double a = std::clamp((*vec)(0), -1.0, 1.0);
  const double u = kMaxTorque * a;
  const double th = state_.theta;
  const double thdot = state_.theta_dot;

  const double dense_cost = th * th + 0.1 * thdot * thdot + 0.001 * u * u;

  double new_thdot = thdot + (3.0 * kGravity / (2.0 * kLength) * std::sin(th) + 3.0 / (kMass * kLength * kLength) * u) * kDt;
  new_thdot = std::clamp(new_thdot, -kMaxSpeed, kMaxSpeed);
  state_.theta = wrap_angle(th + new_thdot * kDt);
  state_.theta_dot = new_thdot;
  ++steps_;

  StepResult res;
  if (reward_ == Reward::dense) {
    res.reward = -dense_cost;
  } else {
    if (std::abs(state_.theta) < kUprightHalfWidth)
      ++state_.upright_counter;
    else
      state_.upright_counter = 0;
    res.reward = state_.upright_counter >= kUprightSteps ? 1.0 : 0.0;
  }
  res.next_state = observation();
  res.done = false;
  res.truncated = steps_ >= spec_.horizon;
  return res;
}

}  // namespace mql
