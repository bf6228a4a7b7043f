#include "mql/env/environment.hpp"

#include <cmath>
#include <stdexcept>

#include "mql/env/gridworld.hpp"
#include "mql/env/pendulum.hpp"

namespace mql {

std::unique_ptr<Environment> make_env(const std::string& name) {
  if (name == "gridworld") return std::make_unique<Gridworld>();
  if (name == "pendulum") return std::make_unique<Pendulum>(Pendulum::Reward::dense);
  if (name == "pendulum-sparse") return std::make_unique<Pendulum>(Pendulum::Reward::sparse);
  throw std::invalid_argument("unknown environment '" + name + "' (expected gridworld, pendulum, pendulum-sparse)");
}

Eigen::VectorXd encode_action(const Action& action, const EnvSpec& spec) {
  if (spec.is_discrete()) {
    const int* index = std::get_if<int>(&action);
    if (!index || *index < 0 || *index >= spec.num_actions())
      throw std::invalid_argument("encode_action: invalid discrete action");
    Eigen::VectorXd onehot = Eigen::VectorXd::Zero(spec.num_actions());
    onehot(*index) = 1.0;
    return onehot;
  }
  const auto* vec = std::get_if<Eigen::VectorXd>(&action);
  if (!vec || vec->size() != spec.action_dim()) throw std::invalid_argument("encode_action: invalid continuous action");
  return *vec;
}

double mc_return_from(Environment& env, const Obs& start, const Policy& policy, double gamma) {
  Obs s = start;
  double ret = 0.0;
  double discount = 1.0;
  for (;;) {
    const auto res = env.step(policy(s));
    ret += discount * res.reward;
    if (res.done || res.truncated) break;
    discount *= gamma;
    s = res.next_state;
  }
  return ret;
}

double mc_return(Environment& env, const Policy& policy, std::uint64_t seed, double gamma) {
  const Obs s0 = env.reset(seed);
  return mc_return_from(env, s0, policy, gamma);
}

}  // namespace mql
