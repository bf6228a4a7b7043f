#pragma once

#include "mql/agents/agent.hpp"

namespace mql {

/// Double-Q agent with hard target updates, epsilon-greedy exploration and an
/// MQN critic over one-hot actions.
class DqnAgent final : public Agent {
 public:
  DqnAgent(const AgentConfig& cfg, const EnvSpec& spec, std::uint64_t seed);

  Action explore(const Obs& s, std::int64_t step, Rng& rng) override;
  Action greedy(const Obs& s) const override;
  double q_value(const Obs& s, const Action& a) const override;
  TrainRecord train_step(ReplayBuffer& buffer, std::int64_t step, Rng& sampler_rng) override;

  /// Q~(s, a) for every action.
  Eigen::VectorXd action_values(const Obs& s) const;
  double epsilon(std::int64_t step) const;

  const MqnNet& online() const { return online_; }
  MqnNet& online() { return online_; }
  const MqnNet& target() const { return target_; }
  MqnNet& target() { return target_; }
  std::int64_t updates() const { return updates_; }

  /// Double-Q bootstrap values Q_target(s', argmax_a Q_online(s', a)).
  Eigen::VectorXd bootstrap_values(const Eigen::MatrixXd& next_states) const;

 private:
  MqnNet online_;
  MqnNet target_;
  MqnAdam adam_;
  std::int64_t updates_ = 0;
};

}  // namespace mql
