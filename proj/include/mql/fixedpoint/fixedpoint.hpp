#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mql/numcore/mlp.hpp"

namespace mql::fixedpoint {

/// Finite MDP with deterministic transitions. Tables are indexed (state, action).
template <typename Scalar>
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  MatrixX<Scalar> reward;            // n_states x n_actions
  Eigen::MatrixXi next_state;        // n_states x n_actions
  Scalar gamma = Scalar(0.9);

  int pairs() const { return n_states * n_actions; }
  int pair(int s, int a) const { return s * n_actions + a; }

  void validate() const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("TabularMdp: empty state or action set");
    if (reward.rows() != n_states || reward.cols() != n_actions || next_state.rows() != n_states ||
        next_state.cols() != n_actions)
      throw std::invalid_argument("TabularMdp: table shapes do not match n_states x n_actions");
    if (!reward.allFinite()) throw std::invalid_argument("TabularMdp: non-finite reward");
    if (next_state.minCoeff() < 0 || next_state.maxCoeff() >= n_states)
      throw std::invalid_argument("TabularMdp: next_state index out of range");
    if (!(gamma >= Scalar(0) && gamma < Scalar(1))) throw std::invalid_argument("TabularMdp: gamma must be in [0, 1)");
  }
};

using Policy = std::vector<int>;

/// One point of the operator's domain. Rows of `s` are per-pair state
/// embeddings (one-hot at the model's next state when exact).
template <typename Scalar>
struct OperatorState {
  MatrixX<Scalar> q;  // n_states x n_actions
  MatrixX<Scalar> r;  // n_states x n_actions
  MatrixX<Scalar> s;  // pairs x n_states
  Policy pi;
};

template <typename Scalar>
struct ContractionParams {
  Scalar zeta1 = Scalar(1e-3);
  Scalar zeta2 = Scalar(1e-3);
  Scalar kappa1 = Scalar(0.1);
  Scalar kappa2 = Scalar(0.1);
};

template <typename Scalar>
Scalar contraction_modulus(const TabularMdp<Scalar>& mdp, const ContractionParams<Scalar>& p) {
  using std::max;
  return max({mdp.gamma, p.zeta1, p.zeta2, Scalar(1) - p.kappa1, Scalar(1) - p.kappa2});
}

template <typename Scalar>
void check_params(const TabularMdp<Scalar>& mdp, const ContractionParams<Scalar>& p) {
  if (p.zeta1 < Scalar(0) || p.zeta2 < Scalar(0)) throw std::invalid_argument("zeta must be >= 0");
  if (!(p.kappa1 > Scalar(0) && p.kappa1 < Scalar(1) && p.kappa2 > Scalar(0) && p.kappa2 < Scalar(1)))
    throw std::invalid_argument("kappa must be in (0, 1)");
  if (!(contraction_modulus(mdp, p) < Scalar(1)))
    throw std::invalid_argument("contraction condition max(gamma, zeta1, zeta2, 1-kappa1, 1-kappa2) < 1 violated");
}

template <typename Scalar>
void check_shapes(const OperatorState<Scalar>& x, const TabularMdp<Scalar>& mdp) {
  if (x.q.rows() != mdp.n_states || x.q.cols() != mdp.n_actions || x.r.rows() != mdp.n_states ||
      x.r.cols() != mdp.n_actions || x.s.rows() != mdp.pairs() || x.s.cols() != mdp.n_states ||
      static_cast<int>(x.pi.size()) != mdp.n_states)
    throw std::invalid_argument("OperatorState: shapes inconsistent with the MDP");
  for (int a : x.pi)
    if (a < 0 || a >= mdp.n_actions) throw std::invalid_argument("OperatorState: policy action out of range");
}

/// Halved Euclidean norm sqrt(sum x^2 / 2).
template <typename Derived>
typename Derived::Scalar half_norm(const Eigen::MatrixBase<Derived>& x) {
  using std::sqrt;
  return sqrt(x.squaredNorm() / typename Derived::Scalar(2));
}

/// One-hot embeddings of the model's next states, one row per pair.
template <typename Scalar>
MatrixX<Scalar> next_state_embedding(const TabularMdp<Scalar>& mdp) {
  MatrixX<Scalar> S = MatrixX<Scalar>::Zero(mdp.pairs(), mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) S(mdp.pair(s, a), mdp.next_state(s, a)) = Scalar(1);
  return S;
}

/// sup |q| + 1/2 sum r^2 + 1/2 sum s^2.
template <typename Scalar>
Scalar composite_norm(const MatrixX<Scalar>& q, const MatrixX<Scalar>& r, const MatrixX<Scalar>& s) {
  return q.cwiseAbs().maxCoeff() + r.squaredNorm() / Scalar(2) + s.squaredNorm() / Scalar(2);
}

template <typename Scalar>
Scalar composite_distance(const OperatorState<Scalar>& x, const OperatorState<Scalar>& y) {
  return composite_norm<Scalar>(x.q - y.q, x.r - y.r, x.s - y.s);
}

template <typename Scalar>
OperatorState<Scalar> apply_operator(const OperatorState<Scalar>& x, const TabularMdp<Scalar>& mdp,
                                     const ContractionParams<Scalar>& p) {
  check_params(mdp, p);
  check_shapes(x, mdp);
  const MatrixX<Scalar> S = next_state_embedding(mdp);
  OperatorState<Scalar> y{MatrixX<Scalar>(mdp.n_states, mdp.n_actions), MatrixX<Scalar>(mdp.n_states, mdp.n_actions),
                          MatrixX<Scalar>(mdp.pairs(), mdp.n_states), x.pi};
  using std::abs;
  for (int st = 0; st < mdp.n_states; ++st) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int i = mdp.pair(st, a);
      const int nxt = mdp.next_state(st, a);
      const Scalar dr = x.r(st, a) - mdp.reward(st, a);
      const Scalar r_norm = abs(dr) / std::sqrt(Scalar(2));
      const Scalar s_norm = half_norm(x.s.row(i) - S.row(i));
      y.q(st, a) = x.r(st, a) + p.zeta1 * r_norm + p.zeta2 * s_norm + mdp.gamma * x.q(nxt, x.pi[nxt]);
      y.r(st, a) = x.r(st, a) - p.kappa1 * dr;
      y.s.row(i) = x.s.row(i) - p.kappa2 * (x.s.row(i) - S.row(i));
    }
  }
  return y;
}

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct FixedPointResult {
  OperatorState<Scalar> state;
  int iters = 0;
  Scalar residual = Scalar(0);
  std::vector<Scalar> residuals;  // composite norm of each update
};

template <typename Scalar>
FixedPointResult<Scalar> iterate_to_fixed_point(const OperatorState<Scalar>& init, const TabularMdp<Scalar>& mdp,
                                                const ContractionParams<Scalar>& p, Scalar tol, int max_iters) {
  if (!(tol > Scalar(0))) throw std::invalid_argument("iterate_to_fixed_point: tol must be > 0");
  FixedPointResult<Scalar> out{init, 0, Scalar(0), {}};
  while (out.iters < max_iters) {
    auto next = apply_operator(out.state, mdp, p);
    out.residual = composite_distance(next, out.state);
    out.residuals.push_back(out.residual);
    out.state = std::move(next);
    ++out.iters;
    if (out.residual < tol) return out;
  }
  throw ConvergenceError("iterate_to_fixed_point: no convergence after " + std::to_string(max_iters) +
                         " iterations (last residual " + std::to_string(double(out.residual)) + ")");
}

/// Solves q = R + gamma q(S, pi(S)) directly over the |S||A| unknowns.
template <typename Scalar>
MatrixX<Scalar> bellman_solve_exact(const TabularMdp<Scalar>& mdp, const Policy& pi) {
  mdp.validate();
  if (static_cast<int>(pi.size()) != mdp.n_states) throw std::invalid_argument("bellman_solve_exact: policy size");
  const int n = mdp.pairs();
  MatrixX<Scalar> A = MatrixX<Scalar>::Identity(n, n);
  VectorX<Scalar> b(n);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int i = mdp.pair(s, a);
      const int nxt = mdp.next_state(s, a);
      A(i, mdp.pair(nxt, pi[nxt])) -= mdp.gamma;
      b(i) = mdp.reward(s, a);
    }
  Eigen::FullPivLU<MatrixX<Scalar>> lu(A);
  if (!lu.isInvertible()) throw std::runtime_error("bellman_solve_exact: singular system");
  const VectorX<Scalar> q = lu.solve(b);
  MatrixX<Scalar> out(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) out(s, a) = q(mdp.pair(s, a));
  return out;
}

/// Per-state argmax, lowest index on ties.
template <typename Scalar>
Policy greedy_policy(const MatrixX<Scalar>& q) {
  Policy pi(static_cast<std::size_t>(q.rows()), 0);
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    int best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = static_cast<int>(a);
    pi[static_cast<std::size_t>(s)] = best;
  }
  return pi;
}

/// Uniform random point of the domain, entries in [-1, 1].
template <typename Scalar>
OperatorState<Scalar> random_state(const TabularMdp<Scalar>& mdp, const Policy& pi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
    MatrixX<Scalar> m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Scalar(u(rng));
    return m;
  };
  OperatorState<Scalar> x;
  x.q = fill(mdp.n_states, mdp.n_actions);
  x.r = fill(mdp.n_states, mdp.n_actions);
  x.s = fill(mdp.pairs(), mdp.n_states);
  x.pi = pi;
  return x;
}

/// Rewards U(-1, 1), next states uniform.
template <typename Scalar>
TabularMdp<Scalar> random_mdp(int n_states, int n_actions, Scalar gamma, std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("random_mdp: sizes must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n_states - 1);
  TabularMdp<Scalar> mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.reward.resize(n_states, n_actions);
  mdp.next_state.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      mdp.reward(s, a) = Scalar(u(rng));
      mdp.next_state(s, a) = pick(rng);
    }
  mdp.validate();
  return mdp;
}

template <typename Scalar>
struct TheoremReport {
  Scalar q_gap = Scalar(0);  // max over improvement steps of max |q* - q0|
  Scalar r_gap = Scalar(0);  // max |r* - R|
  Scalar s_gap = Scalar(0);  // max |s* - S|
  int iters = 0;             // operator iterations, summed over steps
  Scalar residual = Scalar(0);  // worst final residual over steps
  bool policy_invariant = true;
  int improvement_steps = 0;
  MatrixX<Scalar> q_star;  // fixed point under the final (optimal) policy
  Policy final_policy;
  std::vector<Scalar> residuals;  // residual trace of the first evaluation
};

/// Policy iteration in which every evaluation runs the operator to its fixed
/// point and is checked against the exact linear solve. The greedy action of
/// q* must match the greedy action of q0 at every step.
template <typename Scalar>
TheoremReport<Scalar> verify_theorem(const TabularMdp<Scalar>& mdp, const Policy& pi0,
                                     const ContractionParams<Scalar>& p, Scalar tol, std::uint64_t init_seed,
                                     int max_iters = 1000000) {
  mdp.validate();
  check_params(mdp, p);
  const MatrixX<Scalar> S = next_state_embedding(mdp);
  TheoremReport<Scalar> rep;
  Policy pi = pi0;
  using std::max;
  for (int step = 0; step <= mdp.pairs() + 1; ++step) {
    const auto init = random_state(mdp, pi, init_seed + static_cast<std::uint64_t>(step));
    const auto fp = iterate_to_fixed_point(init, mdp, p, tol, max_iters);
    const MatrixX<Scalar> q0 = bellman_solve_exact(mdp, pi);
    rep.q_gap = max(rep.q_gap, (fp.state.q - q0).cwiseAbs().maxCoeff());
    rep.r_gap = max(rep.r_gap, (fp.state.r - mdp.reward).cwiseAbs().maxCoeff());
    rep.s_gap = max(rep.s_gap, (fp.state.s - S).cwiseAbs().maxCoeff());
    rep.residual = max(rep.residual, fp.residual);
    rep.iters += fp.iters;
    if (step == 0) rep.residuals = fp.residuals;
    ++rep.improvement_steps;

    const Policy improved = greedy_policy<Scalar>(q0);
    if (greedy_policy<Scalar>(fp.state.q) != improved) rep.policy_invariant = false;
    rep.q_star = fp.state.q;
    rep.final_policy = pi;
    if (improved == pi) return rep;
    pi = improved;
  }
  throw ConvergenceError("verify_theorem: policy iteration did not stabilise");
}

}  // namespace mql::fixedpoint
