#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mql/numcore/mlp.hpp"

namespace mql {

/// Relative error used by every gradient check: |a - n| / max(1, |a|, |n|).
template <typename Scalar>
Scalar gradient_relative_error(Scalar analytic, Scalar numeric) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) return std::numeric_limits<Scalar>::infinity();
  const Scalar denom = std::max({Scalar(1), std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

/// Central finite differences over an arbitrary set of scalar coordinates.
/// `loss` re-evaluates the objective at the current coordinate values.
/// `pattern`, if given, returns the piecewise-linear region signature
/// (e.g. ReLU masks); coordinates whose +-h probes land in different regions
/// straddle a kink and are skipped.
template <typename Scalar>
Scalar finite_difference_check(const std::vector<Scalar*>& coords, const std::vector<Scalar>& analytic,
                               const std::function<Scalar()>& loss,
                               const std::function<std::vector<bool>()>& pattern = {}, Scalar h = Scalar(1e-5)) {
  if (coords.size() != analytic.size()) throw std::invalid_argument("finite_difference_check: size mismatch");
  Scalar worst = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    Scalar& x = *coords[i];
    const Scalar saved = x;
    x = saved + h;
    const Scalar up = loss();
    std::vector<bool> up_pattern;
    if (pattern) up_pattern = pattern();
    x = saved - h;
    const Scalar down = loss();
    bool kink = false;
    if (pattern) kink = pattern() != up_pattern;
    x = saved;
    if (kink) continue;
    worst = std::max(worst, gradient_relative_error(analytic[i], (up - down) / (2 * h)));
  }
  return worst;
}

/// Loss on the network output: returns (value, d value / d output).
template <typename Scalar>
using OutputLoss = std::function<std::pair<Scalar, MatrixX<Scalar>>(const MatrixX<Scalar>&)>;

/// Max relative error between mlp_backward and central differences over
/// every parameter of `params`.
template <typename Scalar>
Scalar grad_check(const Mlp<Scalar>& params, const MatrixX<Scalar>& input, const OutputLoss<Scalar>& loss) {
  Mlp<Scalar> work = params;
  const auto acts = mlp_forward(work, input);
  const auto [value, out_grad] = loss(acts.output());
  const auto back = mlp_backward(work, acts, out_grad);

  std::vector<Scalar*> coords;
  for_each_parameter(work, [&](Scalar& p) { coords.push_back(&p); });
  std::vector<Scalar> analytic;
  for_each_parameter(back.grad, [&](Scalar g) { analytic.push_back(g); });

  std::function<Scalar()> eval = [&] { return loss(mlp_predict(work, input)).first; };
  std::function<std::vector<bool>()> pattern = [&] { return relu_pattern(work, mlp_forward(work, input)); };
  return finite_difference_check<Scalar>(coords, analytic, eval, pattern);
}

}  // namespace mql
