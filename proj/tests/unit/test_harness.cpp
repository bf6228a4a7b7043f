#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mql/env/gridworld.hpp"
#include "mql/harness/config.hpp"
#include "mql/harness/experiment.hpp"

using namespace mql;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mql_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig tiny_grid(const std::string& out) {
  auto c = default_config("gridworld", AgentFamily::dqn, Variant::mql, SamplerScheme::mper);
  c.total_steps = 400;
  c.eval_interval = 100;
  c.eval_episodes = 2;
  c.bias_episodes = 2;
  c.agent.warmup_steps = 200;
  c.agent.hidden = {16};
  c.out_dir = out;
  return c;
}

}  // namespace

TEST_CASE("config round-trips through its text form") {
  auto c = default_config("pendulum", AgentFamily::td3, Variant::baseline, SamplerScheme::per);
  c.seed = 12345678901234ULL;
  c.agent.gamma = 0.1 + 0.2;
  c.agent.hidden = {64, 32, 8};
  c.agent.zeta.zeta2 = 1.0 / 3.0;
  c.agent.target_gradient = TargetGradient::through_mreward;
  c.agent.replay.new_priority = NewPriority::max;
  c.agent.adaptive_xi = false;
  c.out_dir = "some/dir";
  const auto text = serialize(c);
  const auto back = parse_config(text);
  CHECK(serialize(back) == text);
  CHECK(back.agent.gamma == c.agent.gamma);
  CHECK(back.agent.zeta.zeta2 == c.agent.zeta.zeta2);
  CHECK(back.seed == c.seed);
  CHECK(back.agent.hidden == c.agent.hidden);
  CHECK(back.agent.family == AgentFamily::td3);

  const auto path = scratch("cfg");
  fs::create_directories(path);
  save_config(c, (path / "config").string());
  CHECK(serialize(load_config((path / "config").string())) == text);
  fs::remove_all(path);
}

TEST_CASE("config parsing: family defaults, comments, overrides, errors") {
  const auto c = parse_config("# comment\nagent.family = td3\n\nrun.seed = 4  # trailing\n");
  CHECK(c.agent.batch_size == 100);
  CHECK(c.agent.hidden == std::vector<Eigen::Index>{400, 300});
  CHECK(c.seed == 4);
  CHECK(parse_config("").agent.family == AgentFamily::dqn);

  RunConfig r;
  apply_override(r, "mqn.zeta1=0.25");
  apply_override(r, " replay.sampler = per ");
  CHECK(r.agent.zeta.zeta1 == 0.25);
  CHECK(r.agent.replay.scheme == SamplerScheme::per);
  CHECK_THROWS_AS(apply_override(r, "mqn.zeta9=1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(r, "mqn.zeta1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(r, "agent.batch_size=1.5"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(r, "agent.gamma=fast"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(r, "agent.hidden=4,,4"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(r, "replay.sampler=rank"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("run.seed 4\n"), std::invalid_argument);
  CHECK_THROWS_AS(load_config("/nonexistent/config"), std::invalid_argument);
}

TEST_CASE("family presets") {
  const auto g = default_config("gridworld", AgentFamily::dqn);
  CHECK(g.agent.gamma == 0.99);
  CHECK(g.total_steps == 20000);
  CHECK(g.agent.target_update_interval == 500);
  CHECK(AgentConfig::defaults(AgentFamily::dqn).target_update_interval == 2000);
  const auto p = default_config("pendulum", AgentFamily::td3, Variant::baseline, SamplerScheme::uniform);
  CHECK(p.agent.gamma == 0.98);
  CHECK(p.agent.replay_period == 64);
  CHECK(p.agent.gradient_steps == 64);
  CHECK(p.agent.warmup_steps == 5000);
  CHECK(p.agent.replay.alpha == 0.7);
  CHECK(p.agent.variant == Variant::baseline);
  CHECK(p.agent.replay.scheme == SamplerScheme::uniform);
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y, neg;
  for (double v : x) {
    y.push_back(2 * v);
    neg.push_back(-v);
  }
  CHECK(pearson(x, y).r == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pearson(x, neg).r == doctest::Approx(-1.0).epsilon(1e-14));
  const auto flat = pearson(std::vector<double>(5, 3.0), x);
  CHECK(flat.degenerate);
  CHECK(flat.r == 0.0);
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), std::invalid_argument);
}

TEST_CASE("error_correlation uses the tail window") {
  std::vector<MetricsRow> rows;
  for (int i = 1; i <= 10; ++i) {
    MetricsRow r;
    r.step = i * 100;
    r.reward_model_err = i <= 5 ? 0.0 : 0.1 * i;
    r.transition_model_err = i <= 5 ? 5.0 - i : 0.05 * i;
    r.td_error_true = i <= 5 ? static_cast<double>(i) : 3.0 * i;
    rows.push_back(r);
  }
  CHECK(error_correlation(rows, 0.5).r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(error_correlation(rows, 0.5).n == 5);
  CHECK(error_correlation(rows, 1.0).n == 10);
  CHECK_THROWS_AS(error_correlation(rows, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(error_correlation({rows[0], rows[1]}), std::invalid_argument);
}

TEST_CASE("q-bias plumbing") {
  Gridworld g;
  const double gamma = 0.99;
  const Policy right_then_down = [](const Obs& s) -> Action {
    int cell = 0;
    s.maxCoeff(&cell);
    return cell % 5 < 4 ? int{Gridworld::right} : int{Gridworld::down};
  };
  // Q equal to the MC return from the start, plus c.
  const double c = 0.37;
  ValueProbe shifted{right_then_down, [&](const Obs&, const Action&) {
                       Gridworld fresh;
                       return mc_return(fresh, right_then_down, 0, gamma) + c;
                     }};
  CHECK(estimate_q_bias(shifted, g, 3, gamma, 9) == doctest::Approx(c).epsilon(1e-10));

  // Q = 0 with non-negative rewards underestimates.
  auto pend = make_env("pendulum-sparse");
  ValueProbe zero{[](const Obs&) -> Action { return Eigen::VectorXd::Zero(1); },
                  [](const Obs&, const Action&) { return 0.0; }};
  CHECK(estimate_q_bias(zero, *pend, 3, 0.98, 1) <= 0.0);
  CHECK_THROWS_AS(estimate_q_bias(zero, *pend, 0, 0.98, 1), std::invalid_argument);
}

TEST_CASE("metrics rows format and parse") {
  MetricsRow r;
  r.step = 300;
  r.eval_return_mean = -1.5;
  r.q_bias = 0.125;
  r.xi = {0.5, 2, 10};
  const auto line = format_row(r);
  CHECK(line == "300,-1.5,0,0,0,0,0,0.125,0,0.5,2,10");
  const auto dir = scratch("rows");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "metrics.csv");
    f << kMetricsHeader << '\n' << line << '\n';
  }
  const auto rows = read_metrics((dir / "metrics.csv").string());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].q_bias == 0.125);
  CHECK(rows[0].xi[2] == 10.0);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment writes config and metrics, byte-identical on rerun") {
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto ra = run_experiment(tiny_grid(a.string()));
  const auto rb = run_experiment(tiny_grid(b.string()));
  CHECK_FALSE(ra.diverged);
  CHECK(fs::exists(ra.config_path));
  CHECK(ra.rows.size() == 4);
  CHECK(slurp(ra.metrics_path) == slurp(rb.metrics_path));
  const auto rows = read_metrics(ra.metrics_path);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].step > rows[i - 1].step);
  // The saved config reruns to the same bytes.
  const auto c = scratch("run_c");
  auto reloaded = load_config(ra.config_path);
  reloaded.out_dir = c.string();
  CHECK(slurp(run_experiment(reloaded).metrics_path) == slurp(ra.metrics_path));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST_CASE("runs shorter than warmup only log random-policy evaluations") {
  const auto dir = scratch("warm");
  auto cfg = tiny_grid(dir.string());
  cfg.total_steps = 150;
  cfg.eval_interval = 50;
  std::size_t finished = 0;
  RunHooks hooks;
  hooks.on_finish = [&](const Agent& agent) { finished = agent.log().entries().size() + 1; };
  const auto res = run_experiment(cfg, hooks);
  REQUIRE(res.rows.size() == 3);
  CHECK(finished == 1);
  for (const auto& r : res.rows) {
    CHECK(r.td_error_true == 0.0);
    CHECK(r.reward_model_err == 0.0);
    CHECK(r.xi == std::array<double, 3>{1, 1, 1});
  }
  fs::remove_all(dir);
}

TEST_CASE("variant does not change the warmup trajectory") {
  auto collect = [](Variant v, const std::string& out) {
    auto cfg = tiny_grid(out);
    cfg.agent.variant = v;
    cfg.total_steps = 250;
    std::vector<Transition> log;
    RunHooks hooks;
    hooks.on_transition = [&](std::int64_t t, const Transition& tr) {
      if (t < cfg.agent.warmup_steps) log.push_back(tr);
    };
    run_experiment(cfg, hooks);
    return log;
  };
  const auto a = scratch("var_a"), b = scratch("var_b");
  const auto la = collect(Variant::baseline, a.string());
  const auto lb = collect(Variant::mql, b.string());
  REQUIRE(la.size() == 200);
  REQUIRE(lb.size() == 200);
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].s == lb[i].s);
    CHECK(std::get<int>(la[i].a) == std::get<int>(lb[i].a));
    CHECK(la[i].r == lb[i].r);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("output directory resolution") {
  RunConfig c;
  c.out_dir = "explicit";
  CHECK(resolve_out_dir(c) == "explicit");
  c.out_dir.clear();
  c.seed = 3;
  ::setenv("MQL_OUT_DIR", "/tmp/mqlroot", 1);
  CHECK(resolve_out_dir(c) == "/tmp/mqlroot/gridworld-dqn-mql-uniform-s3");
  ::unsetenv("MQL_OUT_DIR");
  CHECK(resolve_out_dir(c) == "runs/gridworld-dqn-mql-uniform-s3");
}

TEST_CASE("invalid run settings are rejected") {
  auto cfg = tiny_grid(scratch("bad").string());
  cfg.total_steps = 0;
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg = tiny_grid(scratch("bad").string());
  cfg.env = "pendulum";
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg = tiny_grid(scratch("bad").string());
  cfg.env = "mountaincar";
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  fs::remove_all(scratch("bad"));
}
