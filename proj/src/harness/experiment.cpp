#include "mql/harness/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mql/numcore/errors.hpp"

namespace mql {

namespace {

Action random_action(const EnvSpec& spec, Rng& rng) {
  if (spec.is_discrete()) {
    std::uniform_int_distribution<int> pick(0, spec.num_actions() - 1);
    return pick(rng);
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd a(spec.action_dim());
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = u(rng);
  return a;
}

bool row_finite(const MetricsRow& r) {
  const double v[] = {r.eval_return_mean, r.eval_return_std, r.td_error_true, r.td_error_ma, r.reward_model_err,
                      r.transition_model_err, r.q_bias, r.beta, r.xi[0], r.xi[1], r.xi[2]};
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Running means of the per-step training diagnostics between two rows.
struct TrainAccumulator {
  double td_true = 0.0, td_ma = 0.0, r_err = 0.0, t_err = 0.0;
  std::int64_t n = 0;
  double last_beta = -1.0;

  void add(const TrainRecord& rec) {
    td_true += rec.td_error_true;
    td_ma += rec.td_error_ma;
    r_err += rec.reward_model_error;
    t_err += rec.transition_model_error;
    last_beta = rec.beta;
    ++n;
  }
  void fill(MetricsRow& row) const {
    if (n == 0) return;
    row.td_error_true = td_true / static_cast<double>(n);
    row.td_error_ma = td_ma / static_cast<double>(n);
    row.reward_model_err = r_err / static_cast<double>(n);
    row.transition_model_err = t_err / static_cast<double>(n);
  }
};

}  // namespace

std::string format_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                static_cast<long long>(r.step), r.eval_return_mean, r.eval_return_std, r.td_error_true, r.td_error_ma,
                r.reward_model_err, r.transition_model_err, r.q_bias, r.beta, r.xi[0], r.xi[1], r.xi[2]);
  return buf;
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot read metrics " + path);
  std::string line;
  if (!std::getline(f, line) || line != kMetricsHeader) throw std::invalid_argument(path + ": unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 12) throw std::invalid_argument(path + ": malformed row '" + line + "'");
    MetricsRow r;
    r.step = static_cast<std::int64_t>(v[0]);
    r.eval_return_mean = v[1];
    r.eval_return_std = v[2];
    r.td_error_true = v[3];
    r.td_error_ma = v[4];
    r.reward_model_err = v[5];
    r.transition_model_err = v[6];
    r.q_bias = v[7];
    r.beta = v[8];
    r.xi = {v[9], v[10], v[11]};
    rows.push_back(r);
  }
  return rows;
}

std::string resolve_out_dir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  const std::string tag = cfg.env + "-" + to_string(cfg.agent.family) + "-" + to_string(cfg.agent.variant) + "-" +
                          to_string(cfg.agent.replay.scheme) + "-s" + std::to_string(cfg.seed);
  const char* root = std::getenv("MQL_OUT_DIR");
  return (std::filesystem::path(root && *root ? root : "runs") / tag).string();
}

RunResult run_experiment(const RunConfig& cfg, const RunHooks& hooks) {
  if (cfg.total_steps < 1) throw std::invalid_argument("run.total_steps must be >= 1");
  if (cfg.eval_interval < 1) throw std::invalid_argument("run.eval_interval must be >= 1");
  if (cfg.eval_episodes < 1 || cfg.bias_episodes < 1) throw std::invalid_argument("episode counts must be >= 1");
  const auto& ac = cfg.agent;
  if (ac.batch_size < 1 || ac.replay_period < 1 || ac.gradient_steps < 1)
    throw std::invalid_argument("batch_size, replay_period and gradient_steps must be >= 1");

  auto env = make_env(cfg.env);
  const auto eval_env = env->clone();
  AgentConfig agent_cfg = ac;
  agent_cfg.total_steps = cfg.total_steps;
  auto agent = make_agent(agent_cfg, env->spec(), derive_seed(cfg.seed, "init"));
  ReplayBuffer buffer(agent_cfg.replay, agent_cfg.replay_capacity);

  RunResult res;
  res.dir = resolve_out_dir(cfg);
  std::filesystem::create_directories(res.dir);
  res.config_path = (std::filesystem::path(res.dir) / "config").string();
  res.metrics_path = (std::filesystem::path(res.dir) / "metrics.csv").string();
  RunConfig saved = cfg;
  saved.out_dir = res.dir;
  save_config(saved, res.config_path);
  std::ofstream csv(res.metrics_path);
  if (!csv) throw std::runtime_error("cannot write " + res.metrics_path);
  csv << kMetricsHeader << '\n' << std::flush;

  const std::uint64_t env_seed = derive_seed(cfg.seed, "env");
  const std::uint64_t eval_seed = derive_seed(cfg.seed, "eval");
  Rng explore_rng = make_rng(cfg.seed, "explore");
  Rng sampler_rng = make_rng(cfg.seed, "sampler");

  std::uint64_t episode = 0;
  Obs s = env->reset(derive_seed(env_seed, episode));
  TrainAccumulator acc;

  auto emit_row = [&](std::int64_t step) {
    MetricsRow row;
    row.step = step;
    const auto ev = evaluate(*agent, *eval_env, cfg.eval_episodes, eval_seed);
    row.eval_return_mean = ev.mean;
    row.eval_return_std = ev.stddev;
    row.q_bias = estimate_q_bias(*agent, *eval_env, cfg.bias_episodes, agent_cfg.gamma, eval_seed);
    acc.fill(row);
    row.beta = acc.last_beta >= 0.0 ? acc.last_beta : beta_schedule(step, agent_cfg.total_steps, agent_cfg.replay.beta0);
    row.xi = agent->loss_weights().xi;
    if (!row_finite(row)) throw DivergenceError("non-finite metrics at step " + std::to_string(step));
    csv << format_row(row) << '\n' << std::flush;
    res.rows.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
    acc = TrainAccumulator{};
  };

  try {
    for (std::int64_t t = 0; t < cfg.total_steps; ++t) {
      const Action a = t < agent_cfg.warmup_steps ? random_action(env->spec(), explore_rng)
                                                  : agent->explore(s, t, explore_rng);
      const auto step = env->step(a);
      if (!std::isfinite(step.reward) || !step.next_state.allFinite())
        throw DivergenceError("environment produced a non-finite value at step " + std::to_string(t));
      Transition tr{s, a, step.reward, step.next_state, step.done, step.truncated};
      if (hooks.on_transition) hooks.on_transition(t, tr);
      buffer.push(std::move(tr));
      if (step.done || step.truncated) {
        s = env->reset(derive_seed(env_seed, ++episode));
      } else {
        s = step.next_state;
      }

      if (t >= agent_cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(agent_cfg.batch_size) &&
          (t + 1) % agent_cfg.replay_period == 0) {
        for (int g = 0; g < agent_cfg.gradient_steps; ++g) acc.add(agent->train_step(buffer, t, sampler_rng));
      }
      res.steps_completed = t + 1;
      if ((t + 1) % cfg.eval_interval == 0 || t + 1 == cfg.total_steps) emit_row(t + 1);
      if (hooks.stop && hooks.stop(t)) break;
    }
  } catch (const DivergenceError& e) {
    res.diverged = true;
    res.message = e.what();
  }
  if (hooks.on_finish) hooks.on_finish(*agent);
  return res;
}

double estimate_q_bias(const ValueProbe& probe, const Environment& env, int n, double gamma, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("estimate_q_bias: n must be >= 1");
  auto work = env.clone();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto episode_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    const Obs s0 = work->reset(episode_seed);
    const double q = probe.q(s0, probe.policy(s0));
    sum += q - mc_return(*work, probe.policy, episode_seed, gamma);
  }
  return sum / n;
}

double estimate_q_bias(const Agent& agent, const Environment& env, int n, double gamma, std::uint64_t seed) {
  ValueProbe probe{[&agent](const Obs& s) { return agent.greedy(s); },
                   [&agent](const Obs& s, const Action& a) { return agent.q_value(s, a); }};
  return estimate_q_bias(probe, env, n, gamma, seed);
}

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  Correlation c;
  c.n = x.size();
  if (sxx <= 1e-300 || syy <= 1e-300) {
    c.degenerate = true;
    return c;
  }
  c.r = sxy / std::sqrt(sxx * syy);
  return c;
}

Correlation error_correlation(const std::vector<MetricsRow>& rows, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw std::invalid_argument("error_correlation: tail_fraction must be in (0, 1]");
  if (rows.size() < 3) throw std::invalid_argument("error_correlation: need at least 3 records");
  const auto last_step = rows.back().step;
  const double cutoff = static_cast<double>(last_step) * (1.0 - tail_fraction);
  std::vector<double> model, td;
  for (const auto& r : rows) {
    if (static_cast<double>(r.step) <= cutoff && tail_fraction < 1.0) continue;
    model.push_back(r.reward_model_err + r.transition_model_err);
    td.push_back(r.td_error_true);
  }
  if (model.size() < 3) throw std::invalid_argument("error_correlation: fewer than 3 records in the window");
  return pearson(model, td);
}

}  // namespace mql
