#include "mql/replay/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mql {

std::string to_string(SamplerScheme s) {
  switch (s) {
    case SamplerScheme::uniform: return "uniform";
    case SamplerScheme::per: return "per";
    case SamplerScheme::mper: return "mper";
  }
  return "?";
}

SamplerScheme parse_sampler(const std::string& name) {
  if (name == "uniform") return SamplerScheme::uniform;
  if (name == "per") return SamplerScheme::per;
  if (name == "mper") return SamplerScheme::mper;
  throw std::invalid_argument("unknown sampler '" + name + "' (expected uniform, per, mper)");
}

ReplayBuffer::ReplayBuffer(PriorityParams params, std::size_t capacity)
    : params_(params), capacity_(capacity), tree_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (!(params.alpha > 0.0)) throw std::invalid_argument("ReplayBuffer: alpha must be positive");
  if (!(params.epsilon > 0.0)) throw std::invalid_argument("ReplayBuffer: epsilon must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::set_priority(std::size_t i, double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) throw std::invalid_argument("ReplayBuffer: invalid priority");
  sigma_[i] = sigma;
  max_sigma_ = std::max(max_sigma_, sigma);
  tree_.set(i, std::pow(sigma, params_.alpha));
  if (++updates_since_rebuild_ >= params_.rebuild_interval) {
    tree_.rebuild();
    updates_since_rebuild_ = 0;
  }
}

void ReplayBuffer::push(Transition t) {
  const double sigma = params_.new_priority == NewPriority::one ? 1.0 : max_sigma_;
  std::size_t slot;
  if (items_.size() < capacity_) {
    slot = items_.size();
    items_.push_back(std::move(t));
    sigma_.push_back(0.0);
  } else {
    slot = cursor_;
    items_[slot] = std::move(t);
  }
  cursor_ = (slot + 1) % capacity_;
  set_priority(slot, sigma);
}

double ReplayBuffer::priority(std::size_t i) const { return sigma_.at(i); }

double ReplayBuffer::probability(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("ReplayBuffer::probability: index out of range");
  if (params_.scheme == SamplerScheme::uniform) return 1.0 / static_cast<double>(size());
  return tree_.leaf(i) / tree_.total();
}

SampledBatch ReplayBuffer::sample(std::size_t m, double beta, Rng& rng) const {
  if (m == 0) throw std::invalid_argument("ReplayBuffer::sample: batch size must be >= 1");
  if (m > size()) throw std::invalid_argument("ReplayBuffer::sample: batch larger than buffer");
  SampledBatch batch;
  batch.indices.resize(m);
  batch.is_weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m));
  batch.probabilities.resize(static_cast<Eigen::Index>(m));
  const double n = static_cast<double>(size());

  if (params_.scheme == SamplerScheme::uniform) {
    std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
    for (std::size_t k = 0; k < m; ++k) {
      batch.indices[k] = pick(rng);
      batch.probabilities(static_cast<Eigen::Index>(k)) = 1.0 / n;
    }
    return batch;
  }

  const double total = tree_.total();
  const double segment = total / static_cast<double>(m);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < m; ++k) {
    double mass = (static_cast<double>(k) + unit(rng)) * segment;
    mass = std::min(mass, std::nextafter(total, 0.0));
    const std::size_t idx = std::min(tree_.find_prefix(mass), size() - 1);
    batch.indices[k] = idx;
    const double p = tree_.leaf(idx) / total;
    batch.probabilities(static_cast<Eigen::Index>(k)) = p;
    batch.is_weights(static_cast<Eigen::Index>(k)) = std::pow(1.0 / (n * p), beta);
  }
  batch.is_weights /= batch.is_weights.maxCoeff();
  return batch;
}

void ReplayBuffer::set_priorities(const std::vector<std::size_t>& indices, const Eigen::VectorXd& sigma) {
  if (static_cast<Eigen::Index>(indices.size()) != sigma.size())
    throw std::invalid_argument("ReplayBuffer: priority batch length mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw std::out_of_range("ReplayBuffer: priority index out of range");
    set_priority(indices[k], sigma(static_cast<Eigen::Index>(k)));
  }
}

void ReplayBuffer::update_priorities_mper(const std::vector<std::size_t>& indices, const Eigen::VectorXd& delta_q,
                                          const Eigen::VectorXd& delta_r, const Eigen::VectorXd& delta_t_norm_sq,
                                          const std::array<double, 3>& xi) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  if (delta_q.size() != n || delta_r.size() != n || delta_t_norm_sq.size() != n)
    throw std::invalid_argument("update_priorities_mper: batch length mismatch");
  Eigen::VectorXd sigma(n);
  for (Eigen::Index i = 0; i < n; ++i)
    sigma(i) = xi[0] * delta_q(i) * delta_q(i) + xi[1] * delta_r(i) * delta_r(i) + xi[2] * delta_t_norm_sq(i) +
               params_.epsilon;
  set_priorities(indices, sigma);
}

void ReplayBuffer::update_priorities_per(const std::vector<std::size_t>& indices, const Eigen::VectorXd& delta_q) {
  set_priorities(indices, (delta_q.cwiseAbs().array() + params_.epsilon).matrix());
}

double beta_schedule(std::int64_t step, std::int64_t max_steps, double beta0) {
  if (max_steps <= 0) return 1.0;
  const double eta = std::clamp(static_cast<double>(step) / static_cast<double>(max_steps), 0.0, 1.0);
  return beta0 * (1.0 - eta) + 1.0 * eta;
}

}  // namespace mql
