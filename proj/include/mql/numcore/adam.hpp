#pragma once

#include <cmath>
#include <cstdint>

#include "mql/numcore/errors.hpp"
#include "mql/numcore/mlp.hpp"

namespace mql {

template <typename Scalar>
struct AdamState {
  MlpGrad<Scalar> first_moment;
  MlpGrad<Scalar> second_moment;
  std::int64_t step_count = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  static AdamState for_params(const Mlp<Scalar>& params) {
    AdamState s;
    s.first_moment = MlpGrad<Scalar>::zeros_like(params);
    s.second_moment = MlpGrad<Scalar>::zeros_like(params);
    return s;
  }
};

/// Bias-corrected Adam update. Throws DivergenceError, leaving params and
/// state untouched, if any gradient entry is non-finite.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Mlp<Scalar>& params, const MlpGrad<Scalar>& grads, Scalar lr) {
  if (grads.weights.size() != params.weights.size() || state.first_moment.weights.size() != params.weights.size())
    throw std::invalid_argument("adam_step: layer count mismatch");
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    if (grads.weights[k].rows() != params.weights[k].rows() || grads.weights[k].cols() != params.weights[k].cols() ||
        grads.biases[k].size() != params.biases[k].size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
  }
  if (!grads.all_finite()) throw DivergenceError("adam_step: non-finite gradient");

  ++state.step_count;
  const auto t = static_cast<Scalar>(state.step_count);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, t);
  const Scalar b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    update(params.weights[k], state.first_moment.weights[k], state.second_moment.weights[k], grads.weights[k]);
    update(params.biases[k], state.first_moment.biases[k], state.second_moment.biases[k], grads.biases[k]);
  }
}

}  // namespace mql
