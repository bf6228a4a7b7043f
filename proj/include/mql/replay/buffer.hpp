#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mql/env/environment.hpp"
#include "mql/numcore/random.hpp"
#include "mql/replay/sum_tree.hpp"

namespace mql {

struct Transition {
  Obs s;
  Action a;
  double r = 0.0;
  Obs s_next;
  bool terminal = false;
  bool truncated = false;
};

enum class SamplerScheme { uniform, per, mper };

std::string to_string(SamplerScheme s);
SamplerScheme parse_sampler(const std::string& name);

/// Priority assigned to freshly pushed transitions.
enum class NewPriority {
  one,  // sigma = 1.0
  max   // sigma = largest priority seen so far (conventional PER)
};

struct PriorityParams {
  SamplerScheme scheme = SamplerScheme::uniform;
  double alpha = 0.7;
  double beta0 = 0.4;
  double epsilon = 1e-6;
  NewPriority new_priority = NewPriority::one;
  std::size_t rebuild_interval = 100000;
};

struct SampledBatch {
  std::vector<std::size_t> indices;
  Eigen::VectorXd is_weights;  // max-normalized, <= 1
  Eigen::VectorXd probabilities;
};

/// Ring buffer of transitions with proportional prioritized sampling.
/// Leaves of the sum-tree hold sigma^alpha; raw sigma is kept alongside.
class ReplayBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 1000000;

  explicit ReplayBuffer(PriorityParams params, std::size_t capacity = kDefaultCapacity);

  void push(Transition t);

  /// Draws m indices. Uniform scheme: i.i.d. uniform, weights 1. Priority
  /// schemes: one draw per stratum of [0, total), w_i = (1/(N p_i))^beta / max_j w_j.
  SampledBatch sample(std::size_t m, double beta, Rng& rng) const;

  /// sigma_i = xi1 dQ~^2 + xi2 dR^2 + xi3 ||dT||^2 + eps
  void update_priorities_mper(const std::vector<std::size_t>& indices, const Eigen::VectorXd& delta_q,
                              const Eigen::VectorXd& delta_r, const Eigen::VectorXd& delta_t_norm_sq,
                              const std::array<double, 3>& xi);

  /// sigma_i = |dQ| + eps
  void update_priorities_per(const std::vector<std::size_t>& indices, const Eigen::VectorXd& delta_q);

  /// Raw sigma values (before eps is added by the callers above).
  void set_priorities(const std::vector<std::size_t>& indices, const Eigen::VectorXd& sigma);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_.at(i); }
  double priority(std::size_t i) const;  // raw sigma
  double probability(std::size_t i) const;
  const SumTree& tree() const { return tree_; }
  const PriorityParams& params() const { return params_; }

 private:
  void set_priority(std::size_t i, double sigma);

  PriorityParams params_;
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::vector<double> sigma_;
  SumTree tree_;
  std::size_t cursor_ = 0;
  std::size_t updates_since_rebuild_ = 0;
  double max_sigma_ = 1.0;
};

/// beta0 annealed linearly to 1.0 over [0, max_steps].
double beta_schedule(std::int64_t step, std::int64_t max_steps, double beta0);

}  // namespace mql
