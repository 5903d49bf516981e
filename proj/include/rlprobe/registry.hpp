#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rlprobe/agents.hpp"

namespace rlprobe {

struct EnvOptions {
  /// Dataset root for the image envs. Empty falls back to $RLPROBE_DATA_DIR,
  /// then ./data.
  std::filesystem::path data_dir;
  std::size_t window = 5;
  std::size_t max_steps = 100;
  double label_noise = 0.0;     // applied to the train split only
  std::uint64_t label_noise_seed = 0;
};

/// cartpole, cartpole-pixel, acrobot, acrobot-pixel, reacher, thrower,
/// thrower-multi, mnist-explore, cifar-explore.
const std::vector<std::string>& env_names();
bool is_known_env(const std::string& name);
bool is_image_env(const std::string& name);
/// Pixel observations or image exploration; selects the pixel defaults.
bool is_pixel_env(const std::string& name);
double default_gamma(const std::string& name);
/// Known without building the env (image envs need their data to build).
bool env_has_discrete_actions(const std::string& name);

std::filesystem::path resolve_data_dir(const std::filesystem::path& explicit_dir);

/// Loads any dataset once; every call of the factory builds a fresh env
/// sharing it. Throws std::invalid_argument for unknown names and
/// DatasetError when the data is missing or malformed.
EnvFactory env_factory(const std::string& name, const EnvOptions& options = {});
EnvPtr make_env(const std::string& name, const EnvOptions& options = {});

}  // namespace rlprobe
