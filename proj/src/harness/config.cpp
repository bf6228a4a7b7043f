#include "mql/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mql {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

std::vector<Eigen::Index> to_sizes(const std::string& key, const std::string& v) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto n = to_int<long>(key, trim(item));
    if (n < 1) throw std::invalid_argument("config: " + key + " sizes must be >= 1");
    out.push_back(n);
  }
  if (out.empty()) throw std::invalid_argument("config: " + key + " needs at least one size");
  return out;
}

std::string sizes_str(const std::vector<Eigen::Index>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

std::string to_string(TargetGradient g) { return g == TargetGradient::detached ? "detached" : "through_mreward"; }

TargetGradient parse_target_gradient(const std::string& v) {
  if (v == "detached") return TargetGradient::detached;
  if (v == "through_mreward") return TargetGradient::through_mreward;
  throw std::invalid_argument("config: mqn.target_gradient must be detached or through_mreward");
}

std::string to_string(NewPriority p) { return p == NewPriority::one ? "one" : "max"; }

NewPriority parse_new_priority(const std::string& v) {
  if (v == "one") return NewPriority::one;
  if (v == "max") return NewPriority::max;
  throw std::invalid_argument("config: replay.new_priority must be one or max");
}

}  // namespace

RunConfig default_config(const std::string& env, AgentFamily family, Variant variant, SamplerScheme sampler) {
  RunConfig cfg;
  cfg.env = env;
  cfg.agent = AgentConfig::defaults(family);
  cfg.agent.variant = variant;
  cfg.agent.replay.scheme = sampler;
  cfg.total_steps = family == AgentFamily::dqn ? 20000 : 30000;
  // 2000-update hard syncs leave too few target refreshes in a 20k-step gridworld run.
  if (env == "gridworld" && family == AgentFamily::dqn) cfg.agent.target_update_interval = 500;
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  const auto& a = c.agent;
  return {
      {"run.env", c.env},
      {"run.seed", std::to_string(c.seed)},
      {"run.total_steps", std::to_string(c.total_steps)},
      {"run.eval_interval", std::to_string(c.eval_interval)},
      {"run.eval_episodes", std::to_string(c.eval_episodes)},
      {"run.bias_episodes", std::to_string(c.bias_episodes)},
      {"run.out_dir", c.out_dir},
      {"agent.family", to_string(a.family)},
      {"agent.variant", to_string(a.variant)},
      {"agent.gamma", fmt(a.gamma)},
      {"agent.batch_size", std::to_string(a.batch_size)},
      {"agent.replay_period", std::to_string(a.replay_period)},
      {"agent.gradient_steps", std::to_string(a.gradient_steps)},
      {"agent.warmup_steps", std::to_string(a.warmup_steps)},
      {"agent.lr_critic", fmt(a.lr_critic)},
      {"agent.lr_actor", fmt(a.lr_actor)},
      {"agent.hidden", sizes_str(a.hidden)},
      {"agent.eps_start", fmt(a.eps_start)},
      {"agent.eps_end", fmt(a.eps_end)},
      {"agent.eps_fraction", fmt(a.eps_fraction)},
      {"agent.target_update_interval", std::to_string(a.target_update_interval)},
      {"agent.tau", fmt(a.tau)},
      {"agent.action_noise", fmt(a.action_noise)},
      {"agent.target_noise", fmt(a.target_noise)},
      {"agent.noise_clip", fmt(a.noise_clip)},
      {"agent.policy_freq", std::to_string(a.policy_freq)},
      {"mqn.zeta1", fmt(a.zeta.zeta1)},
      {"mqn.zeta2", fmt(a.zeta.zeta2)},
      {"mqn.adaptive_xi", a.adaptive_xi ? "true" : "false"},
      {"mqn.xi1", fmt(a.xi_init[0])},
      {"mqn.xi2", fmt(a.xi_init[1])},
      {"mqn.xi3", fmt(a.xi_init[2])},
      {"mqn.ema_decay", fmt(a.ema_decay)},
      {"mqn.xi_min", fmt(a.xi_min)},
      {"mqn.xi_max", fmt(a.xi_max)},
      {"mqn.target_gradient", to_string(a.target_gradient)},
      {"replay.sampler", to_string(a.replay.scheme)},
      {"replay.alpha", fmt(a.replay.alpha)},
      {"replay.beta0", fmt(a.replay.beta0)},
      {"replay.epsilon", fmt(a.replay.epsilon)},
      {"replay.new_priority", to_string(a.replay.new_priority)},
      {"replay.rebuild_interval", std::to_string(a.replay.rebuild_interval)},
      {"replay.capacity", std::to_string(a.replay_capacity)},
  };
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  auto& a = c.agent;
  const std::string& v = value;
  if (key == "run.env") c.env = v;
  else if (key == "run.seed") c.seed = to_int<std::uint64_t>(key, v);
  else if (key == "run.total_steps") c.total_steps = to_int<std::int64_t>(key, v);
  else if (key == "run.eval_interval") c.eval_interval = to_int<std::int64_t>(key, v);
  else if (key == "run.eval_episodes") c.eval_episodes = to_int<int>(key, v);
  else if (key == "run.bias_episodes") c.bias_episodes = to_int<int>(key, v);
  else if (key == "run.out_dir") c.out_dir = v;
  else if (key == "agent.family") a.family = parse_family(v);
  else if (key == "agent.variant") a.variant = parse_variant(v);
  else if (key == "agent.gamma") a.gamma = to_double(key, v);
  else if (key == "agent.batch_size") a.batch_size = to_int<int>(key, v);
  else if (key == "agent.replay_period") a.replay_period = to_int<int>(key, v);
  else if (key == "agent.gradient_steps") a.gradient_steps = to_int<int>(key, v);
  else if (key == "agent.warmup_steps") a.warmup_steps = to_int<std::int64_t>(key, v);
  else if (key == "agent.lr_critic") a.lr_critic = to_double(key, v);
  else if (key == "agent.lr_actor") a.lr_actor = to_double(key, v);
  else if (key == "agent.hidden") a.hidden = to_sizes(key, v);
  else if (key == "agent.eps_start") a.eps_start = to_double(key, v);
  else if (key == "agent.eps_end") a.eps_end = to_double(key, v);
  else if (key == "agent.eps_fraction") a.eps_fraction = to_double(key, v);
  else if (key == "agent.target_update_interval") a.target_update_interval = to_int<std::int64_t>(key, v);
  else if (key == "agent.tau") a.tau = to_double(key, v);
  else if (key == "agent.action_noise") a.action_noise = to_double(key, v);
  else if (key == "agent.target_noise") a.target_noise = to_double(key, v);
  else if (key == "agent.noise_clip") a.noise_clip = to_double(key, v);
  else if (key == "agent.policy_freq") a.policy_freq = to_int<int>(key, v);
  else if (key == "mqn.zeta1") a.zeta.zeta1 = to_double(key, v);
  else if (key == "mqn.zeta2") a.zeta.zeta2 = to_double(key, v);
  else if (key == "mqn.adaptive_xi") a.adaptive_xi = to_bool(key, v);
  else if (key == "mqn.xi1") a.xi_init[0] = to_double(key, v);
  else if (key == "mqn.xi2") a.xi_init[1] = to_double(key, v);
  else if (key == "mqn.xi3") a.xi_init[2] = to_double(key, v);
  else if (key == "mqn.ema_decay") a.ema_decay = to_double(key, v);
  else if (key == "mqn.xi_min") a.xi_min = to_double(key, v);
  else if (key == "mqn.xi_max") a.xi_max = to_double(key, v);
  else if (key == "mqn.target_gradient") a.target_gradient = parse_target_gradient(v);
  else if (key == "replay.sampler") a.replay.scheme = parse_sampler(v);
  else if (key == "replay.alpha") a.replay.alpha = to_double(key, v);
  else if (key == "replay.beta0") a.replay.beta0 = to_double(key, v);
  else if (key == "replay.epsilon") a.replay.epsilon = to_double(key, v);
  else if (key == "replay.new_priority") a.replay.new_priority = parse_new_priority(v);
  else if (key == "replay.rebuild_interval") a.replay.rebuild_interval = to_int<std::size_t>(key, v);
  else if (key == "replay.capacity") a.replay_capacity = to_int<std::size_t>(key, v);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' is not key=value");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string serialize(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

RunConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> lines;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    lines.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  AgentFamily family = AgentFamily::dqn;
  for (const auto& [k, v] : lines)
    if (k == "agent.family") family = parse_family(v);
  RunConfig cfg;
  cfg.agent = AgentConfig::defaults(family);
  for (const auto& [k, v] : lines) apply_setting(cfg, k, v);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << serialize(cfg);
}

}  // namespace mql
