#pragma once

#include "mql/agents/agent.hpp"

namespace mql {

/// Twin-critic deterministic actor-critic. Both critics are MQNs; the shaped
/// reward for their shared target comes from critic 1's model heads.
class Td3Agent final : public Agent {
 public:
  Td3Agent(const AgentConfig& cfg, const EnvSpec& spec, std::uint64_t seed);

  Action explore(const Obs& s, std::int64_t step, Rng& rng) override;
  Action greedy(const Obs& s) const override;
  double q_value(const Obs& s, const Action& a) const override;
  TrainRecord train_step(ReplayBuffer& buffer, std::int64_t step, Rng& sampler_rng) override;

  /// Critic and actor updates on one already-sampled batch.
  TrainRecord td3_updates(const CriticBatch& batch, const std::vector<std::size_t>& indices, std::int64_t step);

  /// min over the two target critics at a' = clip(pi_target(s') + clip(N(0, s^2), -c, c), -1, 1).
  Eigen::VectorXd bootstrap_values(const Eigen::MatrixXd& next_states);

  /// Clipped target-policy smoothing noise, one column per sample.
  Eigen::MatrixXd smoothing_noise(Eigen::Index cols);

  const MqnNet& critic(int k) const { return k == 0 ? critic1_ : critic2_; }
  MqnNet& critic(int k) { return k == 0 ? critic1_ : critic2_; }
  const MqnNet& target_critic(int k) const { return k == 0 ? target1_ : target2_; }
  MqnNet& target_critic(int k) { return k == 0 ? target1_ : target2_; }
  const ActorNet& actor() const { return actor_; }
  ActorNet& actor() { return actor_; }
  std::int64_t critic_updates() const { return critic_updates_; }

 private:
  void update_actor(const Eigen::MatrixXd& states);

  MqnNet critic1_, critic2_, target1_, target2_;
  MqnAdam adam1_, adam2_;
  ActorNet actor_, actor_target_;
  AdamState<double> actor_adam_;
  Rng noise_rng_;
  std::int64_t critic_updates_ = 0;
};

}  // namespace mql
