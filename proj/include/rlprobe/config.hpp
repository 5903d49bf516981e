#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rlprobe/agents.hpp"
#include "rlprobe/registry.hpp"

namespace rlprobe {

/// Malformed input, unknown key or bad value. Message carries source and line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Valid config, but the env cannot be driven by the chosen agent.
class IncompatibleConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- TOML subset

/// Scalars, strings and single-line arrays; `[section]` headers;
/// `#` comments. Keys are flattened to "section.key".
struct ConfigValue {
  enum class Kind { kBool, kInt, kFloat, kString, kArray };
  Kind kind = Kind::kInt;
  bool b = false;
  std::int64_t i = 0;
  double f = 0.0;
  std::string s;
  std::vector<ConfigValue> items;
  std::size_t line = 0;
};

using ConfigTable = std::map<std::string, ConfigValue>;

ConfigTable parse_toml(std::string_view text, const std::string& source = "<config>");
ConfigTable parse_toml_file(const std::filesystem::path& path);

// ---------------------------------------------------------------- run config

enum class AgentKind { kDqn, kDqnMb, kPpo, kPpoMb };

AgentKind parse_agent(const std::string& name);
std::string agent_name(AgentKind kind);
inline bool is_dqn(AgentKind k) { return k == AgentKind::kDqn || k == AgentKind::kDqnMb; }
inline bool is_model_based(AgentKind k) { return k == AgentKind::kDqnMb || k == AgentKind::kPpoMb; }

struct SweepPlan {
  std::vector<std::size_t> train_seed_counts = {1, 2, 5, 10, 100};
  std::vector<double> p_rand = {0.1, 0.2, 0.5, 1.0};
  std::vector<double> sigma2 = {0.0, 1e-4, 5e-4, 1e-3, 2e-3};
  std::vector<double> init_mult = {1.0, 5.0, 10.0, 20.0, 100.0};
  void validate() const;
};

struct RunConfig {
  std::string env;
  AgentKind agent = AgentKind::kDqn;
  std::size_t train_seeds = 10;
  std::size_t test_seeds = kDefaultTestSeeds;
  std::size_t episodes = 1000;  // DQN budget
  std::size_t steps = 200'000;  // PPO budget
  std::size_t eval_every = 50;  // episodes (DQN) or rollouts (PPO)
  std::uint64_t seed = 0;       // master seed of run 0; run r uses seed + r
  std::size_t runs = 5;
  std::size_t jobs = 1;
  std::string out = "runs";
  std::size_t hidden = 512;
  WrapperSettings wrappers;
  EnvOptions data;
  DQNConfig dqn;
  PPOConfig ppo;
  SweepPlan sweep;

  /// Throws IncompatibleConfig for agent/env pairs that cannot run.
  void check_compatible() const;
};

/// Names of every accepted key, "section.key" form.
std::vector<std::string> config_keys();

/// Applies env- and agent-dependent defaults, then the file table, then the
/// flag overrides (raw strings keyed like the file). Unknown keys are fatal.
RunConfig resolve_config(const ConfigTable& file, const std::map<std::string, std::string>& flags);
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::map<std::string, std::string>& flags);

/// Fully expanded config; parsing it back yields an identical RunConfig.
std::string to_toml(const RunConfig& config);

}  // namespace rlprobe
