#include "mql/agents/td3.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mql {

Td3Agent::Td3Agent(const AgentConfig& cfg, const EnvSpec& spec, std::uint64_t seed)
    : Agent(cfg, spec),
      critic1_(make_mqn(spec.obs_dim, spec.action_encoding_dim(), cfg.hidden, derive_seed(seed, "critic1"))),
      critic2_(make_mqn(spec.obs_dim, spec.action_encoding_dim(), cfg.hidden, derive_seed(seed, "critic2"))),
      target1_(critic1_),
      target2_(critic2_),
      adam1_(MqnAdam::for_net(critic1_)),
      adam2_(MqnAdam::for_net(critic2_)),
      noise_rng_(derive_seed(seed, "target_noise")) {
  if (spec.is_discrete()) throw std::invalid_argument("Td3Agent: environment must have continuous actions");
  if (cfg.policy_freq < 1) throw std::invalid_argument("Td3Agent: policy_freq must be >= 1");
  std::vector<Eigen::Index> sizes{spec.obs_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(spec.action_dim());
  const auto acts = regression_activations(sizes.size() - 1);
  actor_.mlp = mlp_init<double>(sizes, acts, derive_seed(seed, "actor"));
  actor_target_ = actor_;
  actor_adam_ = AdamState<double>::for_params(actor_.mlp);
}

Action Td3Agent::explore(const Obs& s, std::int64_t /*step*/, Rng& rng) {
  return act_continuous(actor_, s, cfg_.action_noise, rng);
}

Action Td3Agent::greedy(const Obs& s) const { return actor_(s); }

double Td3Agent::q_value(const Obs& s, const Action& a) const {
  return q_values(critic1_, s, encode_action(a, spec_))(0);
}

Eigen::MatrixXd Td3Agent::smoothing_noise(Eigen::Index cols) {
  std::normal_distribution<double> noise(0.0, cfg_.target_noise);
  Eigen::MatrixXd eps(spec_.action_dim(), cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < eps.rows(); ++i)
      eps(i, j) = std::clamp(noise(noise_rng_), -cfg_.noise_clip, cfg_.noise_clip);
  return eps;
}

Eigen::VectorXd Td3Agent::bootstrap_values(const Eigen::MatrixXd& next_states) {
  const Eigen::MatrixXd a_next =
      (actor_target_.batch(next_states) + smoothing_noise(next_states.cols())).cwiseMax(-1.0).cwiseMin(1.0);
  const Eigen::RowVectorXd q1 = q_values(target1_, next_states, a_next);
  const Eigen::RowVectorXd q2 = q_values(target2_, next_states, a_next);
  return q1.cwiseMin(q2).transpose();
}

void Td3Agent::update_actor(const Eigen::MatrixXd& states) {
  // Ascend Q~_1(s, tanh(mlp(s))): loss = -mean Q~_1.
  const auto n = states.cols();
  const auto acts = mlp_forward(actor_.mlp, states);
  const Eigen::MatrixXd action = acts.output().array().tanh().matrix();
  const auto fwd = mqn_forward_batch(critic1_, states, action);
  const Eigen::RowVectorXd grad_q = Eigen::RowVectorXd::Constant(n, -1.0 / static_cast<double>(n));
  Eigen::MatrixXd input_grad;
  mqn_backward(critic1_, fwd, grad_q, Eigen::RowVectorXd(), Eigen::MatrixXd(), &input_grad);
  const Eigen::MatrixXd grad_action = input_grad.bottomRows(spec_.action_dim());
  const Eigen::MatrixXd grad_pre = grad_action.cwiseProduct((1.0 - action.array().square()).matrix());
  const auto back = mlp_backward(actor_.mlp, acts, grad_pre);
  adam_step(actor_adam_, actor_.mlp, back.grad, cfg_.lr_actor);
}

TrainRecord Td3Agent::td3_updates(const CriticBatch& batch, const std::vector<std::size_t>& indices,
                                  std::int64_t step) {
  TrainRecord rec;
  rec.step = step;
  rec.indices = indices;
  rec.xi = weights_.xi;

  CriticEvaluation ev1, ev2;
  if (cfg_.variant == Variant::mql) {
    const MqlLossConfig lc{cfg_.zeta, weights_.xi, cfg_.gamma, cfg_.target_gradient};
    ev1 = mql_critic_loss(critic1_, batch, lc);
    ev2 = mql_critic_loss(critic2_, batch, lc, &ev1.r_tilde);
  } else {
    ev1 = baseline_critic_loss(critic1_, batch, cfg_.gamma);
    ev2 = baseline_critic_loss(critic2_, batch, cfg_.gamma);
  }
  adam_step(adam1_, critic1_, ev1.grads, cfg_.lr_critic);
  adam_step(adam2_, critic2_, ev2.grads, cfg_.lr_critic);

  if (++critic_updates_ % cfg_.policy_freq == 0) update_actor(batch.states);

  target_sync(critic1_, target1_, cfg_.tau);
  target_sync(critic2_, target2_, cfg_.tau);
  soft_update(actor_.mlp, actor_target_.mlp, cfg_.tau);

  rec.loss = 0.5 * (ev1.loss.loss + ev2.loss.loss);
  rec.delta_q_true = ev1.delta_q_true;
  rec.td_error_true = ev1.delta_q_true.cwiseAbs().mean();
  if (cfg_.variant == Variant::mql) {
    rec.delta_q_ma = ev1.delta_q_ma;
    rec.delta_r = ev1.delta_r;
    rec.delta_t_norm_sq = ev1.delta_t_norm_sq;
    rec.td_error_ma = ev1.delta_q_ma.cwiseAbs().mean();
    rec.reward_model_error = ev1.delta_r.cwiseAbs().mean();
    rec.transition_model_error = ev1.delta_t_norm_sq.cwiseSqrt().mean();
    const LossComponents mean{0.5 * (ev1.loss.components.q + ev2.loss.components.q),
                              0.5 * (ev1.loss.components.r + ev2.loss.components.r),
                              0.5 * (ev1.loss.components.t + ev2.loss.components.t)};
    update_weights(mean);
  }
  return rec;
}

TrainRecord Td3Agent::train_step(ReplayBuffer& buffer, std::int64_t step, Rng& sampler_rng) {
  const auto m = static_cast<std::size_t>(cfg_.batch_size);
  if (buffer.size() < m) throw std::invalid_argument("train_step: buffer smaller than batch size");
  const double beta = beta_schedule(step, cfg_.total_steps, cfg_.replay.beta0);
  const auto sampled = buffer.sample(m, beta, sampler_rng);
  auto batch = gather_batch(buffer, sampled, spec_);
  batch.q_next_target = bootstrap_values(batch.next_states);
  auto rec = td3_updates(batch, sampled.indices, step);
  rec.beta = beta;
  write_priorities(buffer, rec, rec.xi);
  log_.append(rec);
  return rec;
}

}  // namespace mql
