#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mql/numcore/adam.hpp"
#include "mql/numcore/mlp.hpp"

namespace mql {

using MlpParams = Mlp<double>;
using MlpGrads = MlpGrad<double>;
using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;
using RowVectorXd = Eigen::RowVectorXd;

/// Model-augmented Q-network: one shared trunk over [state; action] and three
/// affine heads predicting Q~(s,a), R(s,a) and T(s,a).
struct MqnNet {
  MlpParams trunk;
  MlpParams q_head;
  MlpParams reward_head;
  MlpParams transition_head;

  Eigen::Index obs_dim() const { return transition_head.output_dim(); }
  Eigen::Index input_dim() const { return trunk.input_dim(); }
  Eigen::Index action_dim() const { return input_dim() - obs_dim(); }
  Eigen::Index parameter_count() const {
    return trunk.parameter_count() + q_head.parameter_count() + reward_head.parameter_count() +
           transition_head.parameter_count();
  }
};

struct MqnGrads {
  MlpGrads trunk;
  MlpGrads q_head;
  MlpGrads reward_head;
  MlpGrads transition_head;

  static MqnGrads zeros_like(const MqnNet& net);
  bool all_finite() const;
};

struct MqnAdam {
  AdamState<double> trunk, q_head, reward_head, transition_head;
  static MqnAdam for_net(const MqnNet& net);
};

/// Builds a net with trunk [obs+act, hidden...] (ReLU throughout) and one
/// affine layer per head. Each part draws from its own seed stream.
MqnNet make_mqn(Eigen::Index obs_dim, Eigen::Index action_dim, const std::vector<Eigen::Index>& hidden,
                std::uint64_t seed);

struct MqnOutput {
  double q_value = 0.0;
  double reward_est = 0.0;
  VectorXd next_state_est;
};

/// Batched forward with everything needed for the backward pass.
struct MqnForward {
  Activations<double> trunk, q, reward, transition;

  RowVectorXd q_values() const { return q.output().row(0); }
  RowVectorXd reward_estimates() const { return reward.output().row(0); }
  const MatrixXd& next_state_estimates() const { return transition.output(); }
};

MatrixXd mqn_input(const MatrixXd& states, const MatrixXd& actions);

/// Columns of `states`/`actions` are samples.
MqnForward mqn_forward_batch(const MqnNet& net, const MatrixXd& states, const MatrixXd& actions);
MqnOutput mqn_forward(const MqnNet& net, const VectorXd& s, const VectorXd& a);

/// Q~ only (trunk + Q head); the path used for bootstrap targets and the
/// baseline TD loss.
RowVectorXd q_values(const MqnNet& net, const MatrixXd& states, const MatrixXd& actions);

/// Backprop of per-sample head cotangents (1xB, 1xB, obs x B). Any head
/// gradient may be empty to mean zero. If `input_grad` is non-null it
/// receives d/d[state; action].
MqnGrads mqn_backward(const MqnNet& net, const MqnForward& fwd, const RowVectorXd& grad_q, const RowVectorXd& grad_r,
                      const MatrixXd& grad_t, MatrixXd* input_grad = nullptr);

void adam_step(MqnAdam& state, MqnNet& net, const MqnGrads& grads, double lr);

template <typename Fn>
void for_each_parameter(MqnNet& net, Fn&& fn) {
  for_each_parameter(net.trunk, fn);
  for_each_parameter(net.q_head, fn);
  for_each_parameter(net.reward_head, fn);
  for_each_parameter(net.transition_head, fn);
}

template <typename Fn>
void for_each_parameter(const MqnGrads& g, Fn&& fn) {
  for_each_parameter(g.trunk, fn);
  for_each_parameter(g.q_head, fn);
  for_each_parameter(g.reward_head, fn);
  for_each_parameter(g.transition_head, fn);
}

// ---------------------------------------------------------------------------
// Model errors, MReward and the model-augmented TD error.

struct MRewardCoeffs {
  double zeta1 = 1e-3;
  double zeta2 = 1e-3;
};

/// R_theta(s,a) - r
inline double reward_error(double reward_est, double r) { return reward_est - r; }

/// T_theta(s,a) - s'
VectorXd transition_error(const VectorXd& next_state_est, const VectorXd& s_next);

/// r~ = R_theta + zeta1 |delta_r| + zeta2 ||delta_t||_2
double mreward(double reward_est, double delta_r, const VectorXd& delta_t, const MRewardCoeffs& c);

/// Q~(s,a) - (r~ + gamma Q~'(s',a')), with Q~' masked on termination only.
double ma_td_error(double q, double q_next_target, double r_tilde, double gamma, bool terminal);

// ---------------------------------------------------------------------------
// Losses.

/// Loss weights xi and the running loss magnitudes that drive them.
struct LossWeights {
  std::array<double, 3> xi{1.0, 1.0, 1.0};
  std::array<double, 3> ema{0.0, 0.0, 0.0};  // (Q~, R, T)
  double ema_decay = 0.99;
  double xi_min = 0.1;
  double xi_max = 10.0;
};

struct LossComponents {
  double q = 0.0;  // mean_i w_i dQ_i^2
  double r = 0.0;  // mean_i w_i dR_i^2
  double t = 0.0;  // mean_i w_i ||dT_i||^2
};

struct TotalLoss {
  double loss = 0.0;
  LossComponents components;
};

/// L = mean_i w_i (xi1 dQ_i^2 + xi2 dR_i^2 + xi3 ||dT_i||^2).
/// delta_t has one column per sample.
TotalLoss total_loss(const VectorXd& delta_q, const VectorXd& delta_r, const MatrixXd& delta_t,
                     const std::array<double, 3>& xi, const VectorXd& is_weights);

/// EMA update with decay, then xi_k = clip(mean(ema) / (3 ema_k + 1e-8), xi_min, xi_max).
LossWeights adaptive_weights(const LossWeights& w, const LossComponents& batch_means);

/// target <- tau * net + (1 - tau) * target, every head and the trunk.
void target_sync(const MqnNet& net, MqnNet& target, double tau);

/// How the bootstrap target depends on theta.
enum class TargetGradient {
  detached,        // (r~ + gamma Q~') is a constant
  through_mreward  // r~ stays differentiable w.r.t. the online reward/transition heads
};

/// One replay batch laid out for the network (columns are samples).
struct CriticBatch {
  MatrixXd states;
  MatrixXd actions;  // encoded
  MatrixXd next_states;
  VectorXd rewards;
  std::vector<bool> terminal;
  VectorXd is_weights;
  VectorXd q_next_target;  // Q~_target(s', a'); ignored where terminal

  Eigen::Index size() const { return states.cols(); }
};

struct MqlLossConfig {
  MRewardCoeffs zeta;
  std::array<double, 3> xi{1.0, 1.0, 1.0};
  double gamma = 0.99;
  TargetGradient target_gradient = TargetGradient::detached;
};

/// Per-sample quantities from one critic loss evaluation.
struct CriticEvaluation {
  TotalLoss loss;
  VectorXd delta_q_ma;    // Q~ - (r~ + gamma Q~')
  VectorXd delta_q_true;  // Q~ - (r + gamma Q~')
  VectorXd delta_r;       // R - r
  MatrixXd delta_t;       // T - s'
  VectorXd delta_t_norm_sq;
  VectorXd r_tilde;
  MqnGrads grads;
};

/// MReward-based loss with gradients. `shaped_reward`, when given, replaces
/// this net's own r~ (twin critics share one shaped reward); it is then
/// treated as a constant regardless of `target_gradient`.
CriticEvaluation mql_critic_loss(const MqnNet& net, const CriticBatch& batch, const MqlLossConfig& cfg,
                                 const VectorXd* shaped_reward = nullptr);

/// Textbook TD loss mean_i w_i (Q - (r + gamma Q'))^2 through the Q path only.
/// Model-error fields of the result are left empty.
CriticEvaluation baseline_critic_loss(const MqnNet& net, const CriticBatch& batch, double gamma);

/// Loss value only, recomputed from scratch; the finite-difference oracle
/// for mql_critic_loss.
double mql_critic_loss_value(const MqnNet& net, const CriticBatch& batch, const MqlLossConfig& cfg,
                             const VectorXd* frozen_target = nullptr);

/// ReLU signature of the whole net on a batch (for kink-aware gradient checks).
std::vector<bool> mqn_relu_pattern(const MqnNet& net, const MatrixXd& states, const MatrixXd& actions);

}  // namespace mql
