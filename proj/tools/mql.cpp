#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mql/fixedpoint/verify.hpp"
#include "mql/harness/experiment.hpp"
#include "mql/numcore/errors.hpp"

namespace {

struct TrainFlags {
  std::string env = "gridworld";
  std::string agent = "dqn";
  std::string variant = "mql";
  std::string sampler = "mper";
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  std::string out;
  std::string config;
  std::vector<std::string> sets;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--env", f.env, "gridworld | pendulum | pendulum-sparse");
  cmd->add_option("--agent", f.agent, "dqn | td3")->check(CLI::IsMember({"dqn", "td3"}));
  cmd->add_option("--variant", f.variant, "baseline | mql")->check(CLI::IsMember({"baseline", "mql"}));
  cmd->add_option("--sampler", f.sampler, "uniform | per | mper")->check(CLI::IsMember({"uniform", "per", "mper"}));
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--steps", f.steps, "environment steps");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "key=value override (repeatable)");
}

// Config file first, then explicit flags, then --set overrides.
mql::RunConfig build_config(const CLI::App* cmd, const TrainFlags& f) {
  mql::RunConfig cfg;
  if (!f.config.empty()) {
    cfg = mql::load_config(f.config);
    if (cmd->count("--env")) cfg.env = f.env;
    if (cmd->count("--agent") && mql::parse_family(f.agent) != cfg.agent.family)
      throw std::invalid_argument("--agent conflicts with agent.family in " + f.config);
    if (cmd->count("--variant")) cfg.agent.variant = mql::parse_variant(f.variant);
    if (cmd->count("--sampler")) cfg.agent.replay.scheme = mql::parse_sampler(f.sampler);
    if (cmd->count("--seed")) cfg.seed = f.seed;
  } else {
    cfg = mql::default_config(f.env, mql::parse_family(f.agent), mql::parse_variant(f.variant),
                              mql::parse_sampler(f.sampler));
    cfg.seed = f.seed;
  }
  if (cmd->count("--steps")) cfg.total_steps = f.steps;
  if (cmd->count("--out")) cfg.out_dir = f.out;
  for (const auto& s : f.sets) mql::apply_override(cfg, s);
  return cfg;
}

void print_run(const mql::RunResult& r) {
  if (r.rows.empty()) {
    std::printf("%s: no metrics rows\n", r.dir.c_str());
    return;
  }
  const auto& last = r.rows.back();
  std::printf("%s: step=%lld eval_return=%.4f q_bias=%.4f%s\n", r.dir.c_str(), static_cast<long long>(last.step),
              last.eval_return_mean, last.q_bias, r.diverged ? " DIVERGED" : "");
}

int cmd_train(const CLI::App* cmd, const TrainFlags& f) {
  const auto cfg = build_config(cmd, f);
  const auto r = mql::run_experiment(cfg);
  print_run(r);
  if (r.diverged) {
    std::fprintf(stderr, "run diverged: %s\n", r.message.c_str());
    return 2;
  }
  return 0;
}

int cmd_sweep(const CLI::App* cmd, const TrainFlags& f, int seeds, std::uint64_t first_seed, int jobs) {
  if (seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  const auto base = build_config(cmd, f);
  const std::string root = base.out_dir.empty() ? mql::resolve_out_dir(base) : base.out_dir;
  std::vector<mql::RunConfig> runs;
  for (int k = 0; k < seeds; ++k) {
    auto c = base;
    c.seed = first_seed + static_cast<std::uint64_t>(k);
    c.out_dir = (std::filesystem::path(root) / ("seed-" + std::to_string(c.seed))).string();
    runs.push_back(c);
  }
  std::vector<mql::RunResult> results(runs.size());
  std::vector<std::string> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < runs.size();) {
      try {
        results[i] = mql::run_experiment(runs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, seeds));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int status = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!errors[i].empty()) {
      std::fprintf(stderr, "seed %llu failed: %s\n", static_cast<unsigned long long>(runs[i].seed), errors[i].c_str());
      status = 1;
      continue;
    }
    print_run(results[i]);
    if (results[i].diverged) status = std::max(status, 2);
  }
  return status;
}

int cmd_analyze(const std::string& dir) {
  const auto rows = mql::read_metrics((std::filesystem::path(dir) / "metrics.csv").string());
  if (rows.empty()) throw std::invalid_argument(dir + ": metrics file has no rows");
  const auto& last = rows.back();
  std::printf("final step %lld eval_return %.6g q_bias %.6g\n", static_cast<long long>(last.step),
              last.eval_return_mean, last.q_bias);
  try {
    const auto c = mql::error_correlation(rows, 0.5);
    std::printf("error correlation r %.6g over %zu records%s\n", c.r, c.n, c.degenerate ? " (degenerate)" : "");
  } catch (const std::invalid_argument& e) {
    std::printf("error correlation unavailable: %s\n", e.what());
  }
  return 0;
}

int cmd_verify(const mql::fixedpoint::VerifyOptions& opts, const std::string& csv) {
  const auto out = mql::fixedpoint::run_verification(opts);
  std::printf("%s\n", mql::fixedpoint::summary_line(opts, out).c_str());
  if (!csv.empty()) mql::fixedpoint::write_residual_csv(csv, out.report.residuals);
  return out.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-augmented Q-learning experiments"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "run one seeded experiment");
  add_train_flags(train, train_flags);

  TrainFlags sweep_flags;
  int sweep_seeds = 5;
  std::uint64_t sweep_first = 0;
  int sweep_jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "run several seeds of one configuration");
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--seeds", sweep_seeds, "number of seeds");
  sweep->add_option("--first-seed", sweep_first, "first seed");
  sweep->add_option("--jobs", sweep_jobs, "parallel runs");

  std::string analyze_dir;
  auto* analyze = app.add_subcommand("analyze", "final bias and error correlation of a run");
  analyze->add_option("dir", analyze_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  mql::fixedpoint::VerifyOptions vopts;
  std::string vcsv = "residuals.csv";
  auto* verify = app.add_subcommand("verify-theorem", "check the operator fixed point against the exact solve");
  verify->add_option("--states", vopts.states, "number of states")->check(CLI::PositiveNumber);
  verify->add_option("--actions", vopts.actions, "number of actions")->check(CLI::PositiveNumber);
  verify->add_option("--gamma", vopts.gamma, "discount in [0, 1)");
  verify->add_option("--zeta", vopts.zeta, "zeta1 = zeta2");
  verify->add_option("--kappa", vopts.kappa, "kappa1 = kappa2");
  verify->add_option("--tol", vopts.tol, "residual tolerance");
  verify->add_option("--seed", vopts.seed, "MDP and initialisation seed");
  verify->add_flag("--sweep", vopts.sweep, "also sweep zeta over 0, 1e-3, 1e-2, 0.1");
  verify->add_option("--csv", vcsv, "residual trace output (empty to skip)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train, train_flags);
    if (*sweep) return cmd_sweep(sweep, sweep_flags, sweep_seeds, sweep_first, sweep_jobs);
    if (*analyze) return cmd_analyze(analyze_dir);
    if (*verify) return cmd_verify(vopts, vcsv);
  } catch (const mql::DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
