#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>

#include <Eigen/Dense>

namespace mql {

using Obs = Eigen::VectorXd;

/// Discrete actions are indices; continuous actions are box-bounded vectors.
using Action = std::variant<int, Eigen::VectorXd>;

struct DiscreteActions {
  int count;
};
struct ContinuousActions {
  int dim;  // bounds are [-1, 1] per dimension
};

struct EnvSpec {
  int obs_dim = 0;
  std::variant<DiscreteActions, ContinuousActions> action_kind;
  int horizon = 1;

  bool is_discrete() const { return std::holds_alternative<DiscreteActions>(action_kind); }
  int num_actions() const { return std::get<DiscreteActions>(action_kind).count; }
  int action_dim() const { return std::get<ContinuousActions>(action_kind).dim; }
  /// Width of the action encoding fed to Q-networks (one-hot for discrete).
  int action_encoding_dim() const { return is_discrete() ? num_actions() : action_dim(); }
};

struct StepResult {
  Obs next_state;
  double reward = 0.0;
  bool done = false;       // terminal: no bootstrapping
  bool truncated = false;  // horizon cut: bootstrap
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Obs reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual std::string name() const = 0;
};

/// `gridworld`, `pendulum`, or `pendulum-sparse`. Throws on unknown names.
std::unique_ptr<Environment> make_env(const std::string& name);

/// One-hot for discrete actions, the raw vector otherwise.
Eigen::VectorXd encode_action(const Action& action, const EnvSpec& spec);

using Policy = std::function<Action(const Obs&)>;

/// Runs one episode from reset(seed) and returns the discounted return.
double mc_return(Environment& env, const Policy& policy, std::uint64_t seed, double gamma);

/// Discounted return of the episode continuing from the env's current state.
double mc_return_from(Environment& env, const Obs& start, const Policy& policy, double gamma);

}  // namespace mql
