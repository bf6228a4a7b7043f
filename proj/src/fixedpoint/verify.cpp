#include "mql/fixedpoint/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mql/numcore/random.hpp"

namespace mql::fixedpoint {

namespace {

ContractionParams<double> params_for(double zeta, double kappa) { return {zeta, zeta, kappa, kappa}; }

}  // namespace

VerifyOutcome run_verification(const VerifyOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mdp = random_mdp<double>(opts.states, opts.actions, opts.gamma, derive_seed(opts.seed, "mdp"));
  const Policy pi0(static_cast<std::size_t>(opts.states), 0);
  const auto init_seed = derive_seed(opts.seed, "init");

  VerifyOutcome out;
  out.report = verify_theorem(mdp, pi0, params_for(opts.zeta, opts.kappa), opts.tol, init_seed);
  out.max_gap = std::max({out.report.q_gap, out.report.r_gap, out.report.s_gap});

  if (opts.sweep) {
    const auto exact_greedy = greedy_policy<double>(bellman_solve_exact(mdp, out.report.final_policy));
    for (double z : opts.sweep_zetas) {
      const auto rep = verify_theorem(mdp, pi0, params_for(z, opts.kappa), opts.tol, init_seed);
      out.max_gap = std::max({out.max_gap, rep.q_gap, rep.r_gap, rep.s_gap});
      out.report.residual = std::max(out.report.residual, rep.residual);
      out.report.policy_invariant = out.report.policy_invariant && rep.policy_invariant;
      if (rep.final_policy != out.report.final_policy || greedy_policy<double>(rep.q_star) != exact_greedy) {
        out.sweep_policy_same = false;
      } else {
        out.sweep_q_spread = std::max(out.sweep_q_spread, (rep.q_star - out.report.q_star).cwiseAbs().maxCoeff());
      }
    }
  }

  out.pass = out.report.residual < opts.tol && out.max_gap < opts.gap_tol && out.report.policy_invariant &&
             out.sweep_policy_same && out.sweep_q_spread < opts.gap_tol;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::string summary_line(const VerifyOptions& opts, const VerifyOutcome& out) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%s states=%d actions=%d gamma=%g zeta=%g kappa=%g iters=%d residual=%.3e q_gap=%.3e r_gap=%.3e "
                "s_gap=%.3e policy_invariant=%s",
                out.pass ? "PASS" : "FAIL", opts.states, opts.actions, opts.gamma, opts.zeta, opts.kappa,
                out.report.iters, out.report.residual, out.report.q_gap, out.report.r_gap, out.report.s_gap,
                out.report.policy_invariant ? "true" : "false");
  std::string line = buf;
  if (opts.sweep) {
    std::snprintf(buf, sizeof buf, " sweep_q_spread=%.3e sweep_policy_same=%s", out.sweep_q_spread,
                  out.sweep_policy_same ? "true" : "false");
    line += buf;
  }
  return line;
}

void write_residual_csv(const std::string& path, const std::vector<double>& residuals) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "iteration,residual\n";
  char buf[64];
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, residuals[i]);
    f << buf;
  }
}

double max_lipschitz_ratio(const TabularMdp<double>& mdp, const Policy& pi, const ContractionParams<double>& p,
                           int n_pairs, std::uint64_t seed) {
  double worst = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    const auto x = random_state(mdp, pi, derive_seed(seed, static_cast<std::uint64_t>(2 * k)));
    const auto y = random_state(mdp, pi, derive_seed(seed, static_cast<std::uint64_t>(2 * k + 1)));
    const double d = composite_distance(x, y);
    if (d <= 0.0) continue;
    worst = std::max(worst, composite_distance(apply_operator(x, mdp, p), apply_operator(y, mdp, p)) / d);
  }
  return worst;
}

}  // namespace mql::fixedpoint
