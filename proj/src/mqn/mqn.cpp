#include "mql/mqn/mqn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mql/numcore/errors.hpp"
#include "mql/numcore/random.hpp"

namespace mql {

namespace {

constexpr double kGuard = 1e-8;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

MlpParams make_head(Eigen::Index in, Eigen::Index out, std::uint64_t seed) {
  const std::vector<Eigen::Index> sizes{in, out};
  const auto acts = regression_activations(1);
  return mlp_init<double>(sizes, acts, seed);
}

void check_batch(const MqnNet& net, const CriticBatch& b) {
  const auto n = b.size();
  if (n == 0) throw std::invalid_argument("critic loss: empty batch");
  if (b.states.rows() != net.obs_dim() || b.next_states.rows() != net.obs_dim() ||
      b.actions.rows() != net.action_dim())
    throw std::invalid_argument("critic loss: batch dimension mismatch");
  if (b.actions.cols() != n || b.next_states.cols() != n || b.rewards.size() != n ||
      static_cast<Eigen::Index>(b.terminal.size()) != n || b.is_weights.size() != n || b.q_next_target.size() != n)
    throw std::invalid_argument("critic loss: batch length mismatch");
}

}  // namespace

MqnGrads MqnGrads::zeros_like(const MqnNet& net) {
  return {MlpGrads::zeros_like(net.trunk), MlpGrads::zeros_like(net.q_head), MlpGrads::zeros_like(net.reward_head),
          MlpGrads::zeros_like(net.transition_head)};
}

bool MqnGrads::all_finite() const {
  return trunk.all_finite() && q_head.all_finite() && reward_head.all_finite() && transition_head.all_finite();
}

MqnAdam MqnAdam::for_net(const MqnNet& net) {
  return {AdamState<double>::for_params(net.trunk), AdamState<double>::for_params(net.q_head),
          AdamState<double>::for_params(net.reward_head), AdamState<double>::for_params(net.transition_head)};
}

MqnNet make_mqn(Eigen::Index obs_dim, Eigen::Index action_dim, const std::vector<Eigen::Index>& hidden,
                std::uint64_t seed) {
  if (obs_dim <= 0 || action_dim <= 0) throw std::invalid_argument("make_mqn: dimensions must be positive");
  if (hidden.empty()) throw std::invalid_argument("make_mqn: trunk needs at least one hidden layer");
  std::vector<Eigen::Index> sizes{obs_dim + action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  const auto acts = feature_activations(sizes.size() - 1);
  MqnNet net;
  net.trunk = mlp_init<double>(sizes, acts, derive_seed(seed, "trunk"));
  const auto feat = hidden.back();
  net.q_head = make_head(feat, 1, derive_seed(seed, "q_head"));
  net.reward_head = make_head(feat, 1, derive_seed(seed, "reward_head"));
  net.transition_head = make_head(feat, obs_dim, derive_seed(seed, "transition_head"));
  return net;
}

MatrixXd mqn_input(const MatrixXd& states, const MatrixXd& actions) {
  if (states.cols() != actions.cols()) throw std::invalid_argument("mqn_input: batch length mismatch");
  MatrixXd x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

namespace {

MqnForward forward_impl(const MqnNet& net, const MatrixXd& states, const MatrixXd& actions, bool model_heads) {
  if (states.rows() != net.obs_dim() || actions.rows() != net.action_dim())
    throw std::invalid_argument("mqn_forward: dimension mismatch");
  MqnForward f;
  f.trunk = mlp_forward(net.trunk, mqn_input(states, actions));
  const auto& feat = f.trunk.output();
  f.q = mlp_forward(net.q_head, feat);
  if (model_heads) {
    f.reward = mlp_forward(net.reward_head, feat);
    f.transition = mlp_forward(net.transition_head, feat);
  }
  return f;
}

}  // namespace

MqnForward mqn_forward_batch(const MqnNet& net, const MatrixXd& states, const MatrixXd& actions) {
  return forward_impl(net, states, actions, true);
}

MqnOutput mqn_forward(const MqnNet& net, const VectorXd& s, const VectorXd& a) {
  const auto f = mqn_forward_batch(net, s, a);
  return {f.q.output()(0, 0), f.reward.output()(0, 0), f.transition.output().col(0)};
}

RowVectorXd q_values(const MqnNet& net, const MatrixXd& states, const MatrixXd& actions) {
  if (states.rows() != net.obs_dim() || actions.rows() != net.action_dim())
    throw std::invalid_argument("q_values: dimension mismatch");
  return mlp_predict(net.q_head, mlp_predict(net.trunk, mqn_input(states, actions))).row(0);
}

MqnGrads mqn_backward(const MqnNet& net, const MqnForward& fwd, const RowVectorXd& grad_q, const RowVectorXd& grad_r,
                      const MatrixXd& grad_t, MatrixXd* input_grad) {
  const auto batch = fwd.trunk.output().cols();
  MatrixXd feat_grad = MatrixXd::Zero(fwd.trunk.output().rows(), batch);
  MqnGrads g;
  auto head = [&](const MlpParams& params, const Activations<double>& acts, const MatrixXd& out_grad,
                  MlpGrads& dst) {
    if (out_grad.size() == 0 || acts.post.empty()) {
      dst = MlpGrads::zeros_like(params);
      return;
    }
    auto back = mlp_backward(params, acts, out_grad);
    feat_grad += back.input_grad;
    dst = std::move(back.grad);
  };
  head(net.q_head, fwd.q, grad_q, g.q_head);
  head(net.reward_head, fwd.reward, grad_r, g.reward_head);
  head(net.transition_head, fwd.transition, grad_t, g.transition_head);
  auto trunk = mlp_backward(net.trunk, fwd.trunk, feat_grad);
  g.trunk = std::move(trunk.grad);
  if (input_grad) *input_grad = std::move(trunk.input_grad);
  return g;
}

void adam_step(MqnAdam& state, MqnNet& net, const MqnGrads& grads, double lr) {
  if (!grads.all_finite()) throw DivergenceError("adam_step: non-finite MQN gradient");
  adam_step(state.trunk, net.trunk, grads.trunk, lr);
  adam_step(state.q_head, net.q_head, grads.q_head, lr);
  adam_step(state.reward_head, net.reward_head, grads.reward_head, lr);
  adam_step(state.transition_head, net.transition_head, grads.transition_head, lr);
}

VectorXd transition_error(const VectorXd& next_state_est, const VectorXd& s_next) {
  if (next_state_est.size() != s_next.size()) throw std::invalid_argument("transition_error: dimension mismatch");
  return next_state_est - s_next;
}

double mreward(double reward_est, double delta_r, const VectorXd& delta_t, const MRewardCoeffs& c) {
  return reward_est + c.zeta1 * std::abs(delta_r) + c.zeta2 * delta_t.norm();
}

double ma_td_error(double q, double q_next_target, double r_tilde, double gamma, bool terminal) {
  const double bootstrap = terminal ? 0.0 : q_next_target;
  return q - (r_tilde + gamma * bootstrap);
}

TotalLoss total_loss(const VectorXd& delta_q, const VectorXd& delta_r, const MatrixXd& delta_t,
                     const std::array<double, 3>& xi, const VectorXd& is_weights) {
  const auto n = delta_q.size();
  if (n == 0) throw std::invalid_argument("total_loss: empty batch");
  if (delta_r.size() != n || delta_t.cols() != n || is_weights.size() != n)
    throw std::invalid_argument("total_loss: batch length mismatch");
  TotalLoss out;
  const double inv_n = 1.0 / static_cast<double>(n);
  out.components.q = is_weights.dot(delta_q.cwiseAbs2()) * inv_n;
  out.components.r = is_weights.dot(delta_r.cwiseAbs2()) * inv_n;
  out.components.t = is_weights.dot(delta_t.colwise().squaredNorm().transpose()) * inv_n;
  out.loss = xi[0] * out.components.q + xi[1] * out.components.r + xi[2] * out.components.t;
  return out;
}

LossWeights adaptive_weights(const LossWeights& w, const LossComponents& batch_means) {
  if (batch_means.q < 0.0 || batch_means.r < 0.0 || batch_means.t < 0.0)
    throw std::invalid_argument("adaptive_weights: component means must be non-negative");
  LossWeights out = w;
  const std::array<double, 3> means{batch_means.q, batch_means.r, batch_means.t};
  for (int k = 0; k < 3; ++k) out.ema[k] = w.ema_decay * w.ema[k] + (1.0 - w.ema_decay) * means[k];
  const double mean_ema = (out.ema[0] + out.ema[1] + out.ema[2]) / 3.0;
  for (int k = 0; k < 3; ++k) out.xi[k] = std::clamp(mean_ema / (3.0 * out.ema[k] + kGuard), w.xi_min, w.xi_max);
  return out;
}

void target_sync(const MqnNet& net, MqnNet& target, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("target_sync: tau must be in (0, 1]");
  soft_update(net.trunk, target.trunk, tau);
  soft_update(net.q_head, target.q_head, tau);
  soft_update(net.reward_head, target.reward_head, tau);
  soft_update(net.transition_head, target.transition_head, tau);
}

CriticEvaluation mql_critic_loss(const MqnNet& net, const CriticBatch& batch, const MqlLossConfig& cfg,
                                 const VectorXd* shaped_reward) {
  check_batch(net, batch);
  const auto n = batch.size();
  if (shaped_reward && shaped_reward->size() != n) throw std::invalid_argument("mql_critic_loss: shaped reward length");

  const auto fwd = mqn_forward_batch(net, batch.states, batch.actions);
  const RowVectorXd q = fwd.q_values();
  const RowVectorXd r_est = fwd.reward_estimates();

  CriticEvaluation ev;
  ev.delta_r = (r_est.transpose() - batch.rewards);
  ev.delta_t = fwd.next_state_estimates() - batch.next_states;
  ev.delta_t_norm_sq = ev.delta_t.colwise().squaredNorm().transpose();
  ev.r_tilde.resize(n);
  ev.delta_q_ma.resize(n);
  ev.delta_q_true.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ev.r_tilde(i) = shaped_reward ? (*shaped_reward)(i)
                                  : mreward(r_est(i), ev.delta_r(i), ev.delta_t.col(i), cfg.zeta);
    const bool term = batch.terminal[static_cast<std::size_t>(i)];
    ev.delta_q_ma(i) = ma_td_error(q(i), batch.q_next_target(i), ev.r_tilde(i), cfg.gamma, term);
    ev.delta_q_true(i) = ma_td_error(q(i), batch.q_next_target(i), batch.rewards(i), cfg.gamma, term);
  }
  ev.loss = total_loss(ev.delta_q_ma, ev.delta_r, ev.delta_t, cfg.xi, batch.is_weights);
  if (!std::isfinite(ev.loss.loss)) throw DivergenceError("mql_critic_loss: non-finite loss");

  const double scale = 2.0 / static_cast<double>(n);
  RowVectorXd gq = (scale * cfg.xi[0]) * batch.is_weights.cwiseProduct(ev.delta_q_ma).transpose();
  RowVectorXd gr = (scale * cfg.xi[1]) * batch.is_weights.cwiseProduct(ev.delta_r).transpose();
  MatrixXd gt = (scale * cfg.xi[2]) * (ev.delta_t * batch.is_weights.asDiagonal());
  if (cfg.target_gradient == TargetGradient::through_mreward && !shaped_reward) {
    // dL/dr~ = -gq; r~ depends on R via (1 + zeta1 sgn dR) and on T via zeta2 dT/||dT||.
    for (Eigen::Index i = 0; i < n; ++i) {
      gr(i) -= gq(i) * (1.0 + cfg.zeta.zeta1 * sign(ev.delta_r(i)));
      const double norm = std::sqrt(ev.delta_t_norm_sq(i));
      if (norm > 0.0) gt.col(i) -= gq(i) * cfg.zeta.zeta2 / norm * ev.delta_t.col(i);
    }
  }
  ev.grads = mqn_backward(net, fwd, gq, gr, gt);
  return ev;
}

CriticEvaluation baseline_critic_loss(const MqnNet& net, const CriticBatch& batch, double gamma) {
  check_batch(net, batch);
  const auto n = batch.size();
  const auto fwd = forward_impl(net, batch.states, batch.actions, false);
  const RowVectorXd q = fwd.q_values();

  CriticEvaluation ev;
  ev.delta_q_true.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool term = batch.terminal[static_cast<std::size_t>(i)];
    ev.delta_q_true(i) = q(i) - (batch.rewards(i) + gamma * (term ? 0.0 : batch.q_next_target(i)));
  }
  ev.loss.components.q = batch.is_weights.dot(ev.delta_q_true.cwiseAbs2()) / static_cast<double>(n);
  ev.loss.loss = ev.loss.components.q;
  if (!std::isfinite(ev.loss.loss)) throw DivergenceError("baseline_critic_loss: non-finite loss");

  const RowVectorXd gq = (2.0 / static_cast<double>(n)) * batch.is_weights.cwiseProduct(ev.delta_q_true).transpose();
  ev.grads = mqn_backward(net, fwd, gq, RowVectorXd(), MatrixXd());
  return ev;
}

double mql_critic_loss_value(const MqnNet& net, const CriticBatch& batch, const MqlLossConfig& cfg,
                             const VectorXd* frozen_target) {
  check_batch(net, batch);
  const auto n = batch.size();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto out = mqn_forward(net, batch.states.col(i), batch.actions.col(i));
    const double dr = reward_error(out.reward_est, batch.rewards(i));
    const VectorXd dt = transition_error(out.next_state_est, batch.next_states.col(i));
    double target;
    if (frozen_target) {
      target = (*frozen_target)(i);
    } else {
      const double r_tilde = mreward(out.reward_est, dr, dt, cfg.zeta);
      target = out.q_value - ma_td_error(out.q_value, batch.q_next_target(i), r_tilde, cfg.gamma,
                                         batch.terminal[static_cast<std::size_t>(i)]);
    }
    const double dq = out.q_value - target;
    loss += batch.is_weights(i) * (cfg.xi[0] * dq * dq + cfg.xi[1] * dr * dr + cfg.xi[2] * dt.squaredNorm());
  }
  return loss / static_cast<double>(n);
}

std::vector<bool> mqn_relu_pattern(const MqnNet& net, const MatrixXd& states, const MatrixXd& actions) {
  const auto fwd = mqn_forward_batch(net, states, actions);
  return relu_pattern(net.trunk, fwd.trunk);
}

}  // namespace mql
