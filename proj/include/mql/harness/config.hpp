#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mql/agents/agent.hpp"

namespace mql {

struct RunConfig {
  std::string env = "gridworld";
  std::uint64_t seed = 0;
  std::int64_t total_steps = 20000;
  std::int64_t eval_interval = 1000;
  int eval_episodes = 10;
  int bias_episodes = 10;
  std::string out_dir;
  AgentConfig agent = AgentConfig::defaults(AgentFamily::dqn);
};

/// Family defaults for `agent`, with the sampler and variant set.
RunConfig default_config(const std::string& env, AgentFamily family, Variant variant = Variant::mql,
                         SamplerScheme sampler = SamplerScheme::mper);

/// Sets one namespaced key ("run.seed", "agent.tau", "mqn.zeta1", ...).
/// Throws std::invalid_argument on unknown keys or unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// "key=value" as given on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Flat `key = value` lines, one per key, doubles printed with 17 significant digits.
std::string serialize(const RunConfig& cfg);

/// Starts from the defaults of the file's agent.family (dqn if absent) and
/// applies every line. '#' starts a comment.
RunConfig parse_config(const std::string& text);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

/// Every serialized key in file order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

}  // namespace mql
