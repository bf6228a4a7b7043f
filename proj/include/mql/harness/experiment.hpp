#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mql/agents/agent.hpp"
#include "mql/harness/config.hpp"

namespace mql {

struct MetricsRow {
  std::int64_t step = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double td_error_true = 0.0;
  double td_error_ma = 0.0;
  double reward_model_err = 0.0;
  double transition_model_err = 0.0;
  double q_bias = 0.0;
  double beta = 0.0;
  std::array<double, 3> xi{1.0, 1.0, 1.0};
};

inline constexpr const char* kMetricsHeader =
    "step,eval_return_mean,eval_return_std,td_error_true,td_error_ma,reward_model_err,transition_model_err,q_bias,"
    "beta,xi1,xi2,xi3";

std::string format_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics(const std::string& path);

struct RunHooks {
  /// Called for every environment step with the stored transition.
  std::function<void(std::int64_t step, const Transition&)> on_transition;
  /// Called after each metrics row is flushed.
  std::function<void(const MetricsRow&)> on_row;
  /// Checked after every step; returning true ends the run early.
  std::function<bool(std::int64_t step)> stop;
  /// Called once with the trained agent when the run ends (also after divergence).
  std::function<void(const Agent&)> on_finish;
};

struct RunResult {
  std::string dir;
  std::string metrics_path;
  std::string config_path;
  std::vector<MetricsRow> rows;
  std::int64_t steps_completed = 0;
  bool diverged = false;
  std::string message;
};

/// Output directory for a run: cfg.out_dir, else $MQL_OUT_DIR/<tag>, else runs/<tag>.
std::string resolve_out_dir(const RunConfig& cfg);

/// Warmup with uniform random actions, then collect/train with the agent's
/// replay period and gradient steps. A metrics row is appended and flushed
/// every eval_interval environment steps (and at the last step). Divergence
/// ends the run early with diverged = true; rows written so far stay valid.
/// Randomness: streams "env", "explore", "sampler", "init", "eval" derived
/// from cfg.seed.
RunResult run_experiment(const RunConfig& cfg, const RunHooks& hooks = {});

/// What the bias estimate needs from an agent.
struct ValueProbe {
  std::function<Action(const Obs&)> policy;
  std::function<double(const Obs&, const Action&)> q;
};

/// mean_i [Q(s0_i, a0_i) - discounted MC return of the greedy policy from
/// s0_i], with s0_i = env.reset(derive_seed(seed, i)) and a0_i = policy(s0_i).
double estimate_q_bias(const ValueProbe& probe, const Environment& env, int n, double gamma, std::uint64_t seed);
double estimate_q_bias(const Agent& agent, const Environment& env, int n, double gamma, std::uint64_t seed);

struct Correlation {
  double r = 0.0;
  bool degenerate = false;
  std::size_t n = 0;
};

/// Pearson r; zero-variance input gives r = 0 with degenerate set.
Correlation pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Pearson r between reward_model_err + transition_model_err and
/// td_error_true over the last `tail_fraction` of rows.
Correlation error_correlation(const std::vector<MetricsRow>& rows, double tail_fraction = 0.5);

}  // namespace mql
