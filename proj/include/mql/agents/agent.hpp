#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mql/env/environment.hpp"
#include "mql/mqn/mqn.hpp"
#include "mql/numcore/random.hpp"
#include "mql/replay/buffer.hpp"

namespace mql {

enum class Variant { baseline, mql };
enum class AgentFamily { dqn, td3 };

std::string to_string(Variant v);
std::string to_string(AgentFamily f);
Variant parse_variant(const std::string& s);
AgentFamily parse_family(const std::string& s);

struct AgentConfig {
  AgentFamily family = AgentFamily::dqn;
  Variant variant = Variant::mql;
  double gamma = 0.99;
  int batch_size = 32;
  int replay_period = 1;
  int gradient_steps = 1;
  std::int64_t warmup_steps = 1600;
  std::int64_t total_steps = 100000;  // drives the beta and epsilon schedules
  double lr_critic = 1e-4;
  double lr_actor = 1e-3;
  std::vector<Eigen::Index> hidden{256};

  // Discrete family.
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.2;
  std::int64_t target_update_interval = 2000;

  // Continuous family.
  double tau = 5e-3;
  double action_noise = 0.1;
  double target_noise = 0.2;
  double noise_clip = 0.5;
  int policy_freq = 2;

  // Model-augmented critic.
  MRewardCoeffs zeta;
  bool adaptive_xi = true;
  std::array<double, 3> xi_init{1.0, 1.0, 1.0};
  double ema_decay = 0.99;
  double xi_min = 0.1;
  double xi_max = 10.0;
  TargetGradient target_gradient = TargetGradient::detached;

  PriorityParams replay;
  std::size_t replay_capacity = ReplayBuffer::kDefaultCapacity;

  /// Hyper-parameter defaults for each family.
  static AgentConfig defaults(AgentFamily family);
};

/// One gradient step: batch means for logging plus the per-sample errors the
/// priorities were written from.
struct TrainRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double td_error_true = 0.0;           // mean |Q - (r + gamma Q')|
  double td_error_ma = 0.0;             // mean |Q~ - (r~ + gamma Q~')|
  double reward_model_error = 0.0;      // mean |dR|
  double transition_model_error = 0.0;  // mean ||dT||
  std::array<double, 3> xi{1.0, 1.0, 1.0};
  double beta = 0.0;

  std::vector<std::size_t> indices;
  Eigen::VectorXd delta_q_ma;
  Eigen::VectorXd delta_q_true;
  Eigen::VectorXd delta_r;
  Eigen::VectorXd delta_t_norm_sq;
};

struct TrainLogEntry {
  std::int64_t step;
  double td_error_true, td_error_ma, reward_model_error, transition_model_error;
  std::array<double, 3> xi;
  double beta;
};

/// Append-only; one entry per gradient step.
class TrainLog {
 public:
  void append(const TrainRecord& r) {
    entries_.push_back({r.step, r.td_error_true, r.td_error_ma, r.reward_model_error, r.transition_model_error, r.xi,
                        r.beta});
  }
  const std::vector<TrainLogEntry>& entries() const { return entries_; }

 private:
  std::vector<TrainLogEntry> entries_;
};

class Agent {
 public:
  virtual ~Agent() = default;
  /// Behaviour policy during training.
  virtual Action explore(const Obs& s, std::int64_t step, Rng& rng) = 0;
  /// Noise-free evaluation policy.
  virtual Action greedy(const Obs& s) const = 0;
  /// Q~(s, a) from the (first) online critic.
  virtual double q_value(const Obs& s, const Action& a) const = 0;
  virtual TrainRecord train_step(ReplayBuffer& buffer, std::int64_t step, Rng& sampler_rng) = 0;

  const AgentConfig& config() const { return cfg_; }
  const EnvSpec& env_spec() const { return spec_; }
  const TrainLog& log() const { return log_; }
  const LossWeights& loss_weights() const { return weights_; }
  LossWeights& loss_weights() { return weights_; }

 protected:
  Agent(AgentConfig cfg, EnvSpec spec);
  void write_priorities(ReplayBuffer& buffer, const TrainRecord& rec, const std::array<double, 3>& xi) const;
  /// EMA/xi update after a step, when the variant and config call for it.
  void update_weights(const LossComponents& components);

  AgentConfig cfg_;
  EnvSpec spec_;
  TrainLog log_;
  LossWeights weights_;
};

/// Epsilon-greedy over Q~(s, .); ties go to the lowest index.
int act_discrete(const MqnNet& net, const Obs& s, int num_actions, double epsilon, Rng& rng);

/// Index of the largest entry, lowest index on ties.
int argmax_lowest(const Eigen::VectorXd& values);

/// Deterministic actor: tanh(mlp(s)).
struct ActorNet {
  MlpParams mlp;
  Eigen::VectorXd operator()(const Obs& s) const;
  Eigen::MatrixXd batch(const Eigen::MatrixXd& states) const;
};

/// tanh(actor(s)) + N(0, noise_std^2), clipped to [-1, 1].
Eigen::VectorXd act_continuous(const ActorNet& actor, const Obs& s, double noise_std, Rng& rng);

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

/// Undiscounted returns of the greedy policy; episode i resets with
/// derive_seed(seed, i).
EvalResult evaluate(const Agent& agent, const Environment& env, int n_episodes, std::uint64_t seed);

/// Builds the agent for `spec`; rejects family/action-space mismatches.
std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const EnvSpec& spec, std::uint64_t seed);

/// Stacks replay entries into network-ready columns.
CriticBatch gather_batch(const ReplayBuffer& buffer, const SampledBatch& sampled, const EnvSpec& spec);

}  // namespace mql
