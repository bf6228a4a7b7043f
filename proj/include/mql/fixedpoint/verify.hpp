#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mql/fixedpoint/fixedpoint.hpp"

namespace mql::fixedpoint {

struct VerifyOptions {
  int states = 8;
  int actions = 3;
  double gamma = 0.9;
  double zeta = 1e-3;  // zeta1 = zeta2
  double kappa = 0.1;  // kappa1 = kappa2
  double tol = 1e-10;
  double gap_tol = 1e-8;
  std::uint64_t seed = 0;
  bool sweep = false;
  std::vector<double> sweep_zetas{0.0, 1e-3, 1e-2, 0.1};
};

struct VerifyOutcome {
  TheoremReport<double> report;  // at opts.zeta
  double sweep_q_spread = 0.0;   // max |q*_zeta - q*_zeta'| over the sweep
  bool sweep_policy_same = true;
  double max_gap = 0.0;
  bool pass = false;
  double seconds = 0.0;
};

/// Random MDP from (states, actions, gamma, seed), then verify_theorem and,
/// if requested, the zeta sweep on the same MDP.
VerifyOutcome run_verification(const VerifyOptions& opts);

/// One-line PASS/FAIL summary.
std::string summary_line(const VerifyOptions& opts, const VerifyOutcome& out);

/// Writes "iteration,residual" rows.
void write_residual_csv(const std::string& path, const std::vector<double>& residuals);

/// Largest ||P x - P y|| / ||x - y|| over `n_pairs` independent uniform pairs.
double max_lipschitz_ratio(const TabularMdp<double>& mdp, const Policy& pi, const ContractionParams<double>& p,
                           int n_pairs, std::uint64_t seed);

}  // namespace mql::fixedpoint
