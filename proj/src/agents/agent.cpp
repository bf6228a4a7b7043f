#include "mql/agents/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mql/agents/dqn.hpp"
#include "mql/agents/td3.hpp"

namespace mql {

std::string to_string(Variant v) { return v == Variant::baseline ? "baseline" : "mql"; }
std::string to_string(AgentFamily f) { return f == AgentFamily::dqn ? "dqn" : "td3"; }

Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::baseline;
  if (s == "mql") return Variant::mql;
  throw std::invalid_argument("unknown variant '" + s + "' (expected baseline, mql)");
}

AgentFamily parse_family(const std::string& s) {
  if (s == "dqn") return AgentFamily::dqn;
  if (s == "td3") return AgentFamily::td3;
  throw std::invalid_argument("unknown agent '" + s + "' (expected dqn, td3)");
}

AgentConfig AgentConfig::defaults(AgentFamily family) {
  AgentConfig c;
  c.family = family;
  if (family == AgentFamily::dqn) {
    c.gamma = 0.99;
    c.batch_size = 32;
    c.replay_period = 1;
    c.gradient_steps = 1;
    c.warmup_steps = 1600;
    c.lr_critic = 1e-4;
    c.hidden = {256};
    c.target_update_interval = 2000;
    c.replay.alpha = 0.5;
    c.replay.beta0 = 0.4;
  } else {
    c.gamma = 0.98;
    c.batch_size = 100;
    c.replay_period = 64;
    c.gradient_steps = 64;
    c.warmup_steps = 5000;
    c.lr_critic = 1e-3;
    c.lr_actor = 1e-3;
    c.hidden = {400, 300};
    c.tau = 5e-3;
    c.action_noise = 0.1;
    c.target_noise = 0.2;
    c.noise_clip = 0.5;
    c.policy_freq = 2;
    c.replay.alpha = 0.7;
    c.replay.beta0 = 0.4;
  }
  return c;
}

Agent::Agent(AgentConfig cfg, EnvSpec spec) : cfg_(std::move(cfg)), spec_(std::move(spec)) {
  weights_.xi = cfg_.xi_init;
  weights_.ema_decay = cfg_.ema_decay;
  weights_.xi_min = cfg_.xi_min;
  weights_.xi_max = cfg_.xi_max;
}

void Agent::write_priorities(ReplayBuffer& buffer, const TrainRecord& rec, const std::array<double, 3>& xi) const {
  switch (buffer.params().scheme) {
    case SamplerScheme::uniform: break;
    case SamplerScheme::per: buffer.update_priorities_per(rec.indices, rec.delta_q_true); break;
    case SamplerScheme::mper:
      if (cfg_.variant == Variant::mql) {
        buffer.update_priorities_mper(rec.indices, rec.delta_q_ma, rec.delta_r, rec.delta_t_norm_sq, xi);
      } else {
        // Without model heads only the TD term remains.
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(rec.delta_q_true.size());
        buffer.update_priorities_mper(rec.indices, rec.delta_q_true, zero, zero, xi);
      }
      break;
  }
}

void Agent::update_weights(const LossComponents& components) {
  if (cfg_.variant == Variant::mql && cfg_.adaptive_xi) weights_ = adaptive_weights(weights_, components);
}

int argmax_lowest(const Eigen::VectorXd& values) {
  int best = 0;
  for (int i = 1; i < values.size(); ++i)
    if (values(i) > values(best)) best = i;
  return best;
}

int act_discrete(const MqnNet& net, const Obs& s, int num_actions, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("act_discrete: epsilon must be in [0, 1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, num_actions - 1);
    return pick(rng);
  }
  const Eigen::MatrixXd states = s.replicate(1, num_actions);
  const Eigen::MatrixXd actions = Eigen::MatrixXd::Identity(num_actions, num_actions);
  return argmax_lowest(q_values(net, states, actions).transpose());
}

Eigen::VectorXd ActorNet::operator()(const Obs& s) const { return batch(s).col(0); }

Eigen::MatrixXd ActorNet::batch(const Eigen::MatrixXd& states) const {
  return mlp_predict(mlp, states).array().tanh().matrix();
}

Eigen::VectorXd act_continuous(const ActorNet& actor, const Obs& s, double noise_std, Rng& rng) {
  if (!(noise_std >= 0.0)) throw std::invalid_argument("act_continuous: noise_std must be >= 0");
  Eigen::VectorXd a = actor(s);
  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += noise(rng);
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

EvalResult evaluate(const Agent& agent, const Environment& env, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  EvalResult out;
  auto work = env.clone();
  for (int i = 0; i < n_episodes; ++i) {
    Obs s = work->reset(derive_seed(seed, static_cast<std::uint64_t>(i)));
    double ret = 0.0;
    for (;;) {
      const auto res = work->step(agent.greedy(s));
      ret += res.reward;
      if (res.done || res.truncated) break;
      s = res.next_state;
    }
    out.returns.push_back(ret);
  }
  double sum = 0.0;
  for (double r : out.returns) sum += r;
  out.mean = sum / n_episodes;
  double var = 0.0;
  for (double r : out.returns) var += (r - out.mean) * (r - out.mean);
  out.stddev = std::sqrt(var / n_episodes);
  return out;
}

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const EnvSpec& spec, std::uint64_t seed) {
  if (cfg.family == AgentFamily::dqn) {
    if (!spec.is_discrete()) throw std::invalid_argument("agent dqn requires a discrete-action environment");
    return std::make_unique<DqnAgent>(cfg, spec, seed);
  }
  if (spec.is_discrete()) throw std::invalid_argument("agent td3 requires a continuous-action environment");
  return std::make_unique<Td3Agent>(cfg, spec, seed);
}

CriticBatch gather_batch(const ReplayBuffer& buffer, const SampledBatch& sampled, const EnvSpec& spec) {
  const auto n = static_cast<Eigen::Index>(sampled.indices.size());
  CriticBatch b;
  b.states.resize(spec.obs_dim, n);
  b.next_states.resize(spec.obs_dim, n);
  b.actions.resize(spec.action_encoding_dim(), n);
  b.rewards.resize(n);
  b.terminal.resize(static_cast<std::size_t>(n));
  b.is_weights = sampled.is_weights;
  b.q_next_target = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = buffer[sampled.indices[static_cast<std::size_t>(i)]];
    b.states.col(i) = t.s;
    b.next_states.col(i) = t.s_next;
    b.actions.col(i) = encode_action(t.a, spec);
    b.rewards(i) = t.r;
    b.terminal[static_cast<std::size_t>(i)] = t.terminal;
  }
  return b;
}

}  // namespace mql
