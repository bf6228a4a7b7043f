#include "mql/agents/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mql {

namespace {

/// Every (state, action) pair: column b * n + a holds (states[b], e_a).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> all_action_pairs(const Eigen::MatrixXd& states, int n) {
  const auto batch = states.cols();
  Eigen::MatrixXd s(states.rows(), batch * n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, batch * n);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int k = 0; k < n; ++k) {
      s.col(b * n + k) = states.col(b);
      a(k, b * n + k) = 1.0;
    }
  return {std::move(s), std::move(a)};
}

}  // namespace

DqnAgent::DqnAgent(const AgentConfig& cfg, const EnvSpec& spec, std::uint64_t seed)
    : Agent(cfg, spec),
      online_(make_mqn(spec.obs_dim, spec.action_encoding_dim(), cfg.hidden, derive_seed(seed, "critic"))),
      target_(online_),
      adam_(MqnAdam::for_net(online_)) {
  if (!spec.is_discrete()) throw std::invalid_argument("DqnAgent: environment must have discrete actions");
  if (cfg.target_update_interval < 1) throw std::invalid_argument("DqnAgent: target_update_interval must be >= 1");
}

double DqnAgent::epsilon(std::int64_t step) const {
  const double horizon = cfg_.eps_fraction * static_cast<double>(cfg_.total_steps);
  const double frac = horizon > 0.0 ? std::max(0.0, 1.0 - static_cast<double>(step) / horizon) : 0.0;
  return cfg_.eps_end + (cfg_.eps_start - cfg_.eps_end) * frac;
}

Action DqnAgent::explore(const Obs& s, std::int64_t step, Rng& rng) {
  return act_discrete(online_, s, spec_.num_actions(), epsilon(step), rng);
}

Eigen::VectorXd DqnAgent::action_values(const Obs& s) const {
  const int n = spec_.num_actions();
  return q_values(online_, s.replicate(1, n), Eigen::MatrixXd::Identity(n, n)).transpose();
}

Action DqnAgent::greedy(const Obs& s) const { return argmax_lowest(action_values(s)); }

double DqnAgent::q_value(const Obs& s, const Action& a) const {
  return q_values(online_, s, encode_action(a, spec_))(0);
}

Eigen::VectorXd DqnAgent::bootstrap_values(const Eigen::MatrixXd& next_states) const {
  const int n = spec_.num_actions();
  const auto batch = next_states.cols();
  const auto [s, a] = all_action_pairs(next_states, n);
  const Eigen::RowVectorXd q_online = q_values(online_, s, a);
  const Eigen::RowVectorXd q_target = q_values(target_, s, a);
  Eigen::VectorXd out(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int best = argmax_lowest(q_online.segment(b * n, n).transpose());
    out(b) = q_target(b * n + best);
  }
  return out;
}

TrainRecord DqnAgent::train_step(ReplayBuffer& buffer, std::int64_t step, Rng& sampler_rng) {
  const auto m = static_cast<std::size_t>(cfg_.batch_size);
  if (buffer.size() < m) throw std::invalid_argument("train_step: buffer smaller than batch size");

  TrainRecord rec;
  rec.step = step;
  rec.beta = beta_schedule(step, cfg_.total_steps, cfg_.replay.beta0);
  const auto sampled = buffer.sample(m, rec.beta, sampler_rng);
  auto batch = gather_batch(buffer, sampled, spec_);
  batch.q_next_target = bootstrap_values(batch.next_states);
  rec.indices = sampled.indices;
  rec.xi = weights_.xi;

  CriticEvaluation ev;
  if (cfg_.variant == Variant::mql) {
    ev = mql_critic_loss(online_, batch, {cfg_.zeta, weights_.xi, cfg_.gamma, cfg_.target_gradient});
  } else {
    ev = baseline_critic_loss(online_, batch, cfg_.gamma);
  }
  adam_step(adam_, online_, ev.grads, cfg_.lr_critic);

  rec.loss = ev.loss.loss;
  rec.delta_q_true = ev.delta_q_true;
  rec.td_error_true = ev.delta_q_true.cwiseAbs().mean();
  if (cfg_.variant == Variant::mql) {
    rec.delta_q_ma = ev.delta_q_ma;
    rec.delta_r = ev.delta_r;
    rec.delta_t_norm_sq = ev.delta_t_norm_sq;
    rec.td_error_ma = ev.delta_q_ma.cwiseAbs().mean();
    rec.reward_model_error = ev.delta_r.cwiseAbs().mean();
    rec.transition_model_error = ev.delta_t_norm_sq.cwiseSqrt().mean();
  }
  write_priorities(buffer, rec, rec.xi);
  update_weights(ev.loss.components);

  if (++updates_ % cfg_.target_update_interval == 0) target_sync(online_, target_, 1.0);
  log_.append(rec);
  return rec;
}

}  // namespace mql
