#include "rlprobe/registry.hpp"

#include <algorithm>
#include <cstdlib>

#include "rlprobe/arm.hpp"
#include "rlprobe/classic.hpp"
#include "rlprobe/image.hpp"

namespace rlprobe {

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names = {"cartpole", "cartpole-pixel", "acrobot",       "acrobot-pixel",
                                                 "reacher",  "thrower",        "thrower-multi", "mnist-explore",
                                                 "cifar-explore"};
  return names;
}

bool is_known_env(const std::string& name) {
  const auto& n = env_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

bool is_image_env(const std::string& name) { return name == "mnist-explore" || name == "cifar-explore"; }

bool is_pixel_env(const std::string& name) {
  return is_image_env(name) || name == "cartpole-pixel" || name == "acrobot-pixel";
}

double default_gamma(const std::string& name) {
  return name == "cartpole" || name == "cartpole-pixel" ? 0.995 : 0.99;
}

bool env_has_discrete_actions(const std::string& name) {
  if (!is_known_env(name)) throw std::invalid_argument("unknown env '" + name + "'");
  return name != "reacher" && name != "thrower" && name != "thrower-multi";
}

std::filesystem::path resolve_data_dir(const std::filesystem::path& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("RLPROBE_DATA_DIR"); env && *env) return env;
  return "data";
}

EnvFactory env_factory(const std::string& name, const EnvOptions& options) {
  if (name == "cartpole") return [] { return EnvPtr(std::make_unique<CartpoleEnv>()); };
  if (name == "acrobot") return [] { return EnvPtr(std::make_unique<AcrobotEnv>()); };
  if (name == "cartpole-pixel")
    return [] { return EnvPtr(std::make_unique<PixelEnv>(std::make_unique<CartpoleEnv>())); };
  if (name == "acrobot-pixel")
    return [] { return EnvPtr(std::make_unique<PixelEnv>(std::make_unique<AcrobotEnv>())); };
  if (name == "reacher") return [] { return EnvPtr(std::make_unique<ReacherEnv>()); };
  if (name == "thrower") return [] { return EnvPtr(std::make_unique<ThrowerEnv>(false)); };
  if (name == "thrower-multi") return [] { return EnvPtr(std::make_unique<ThrowerEnv>(true)); };
  if (is_image_env(name)) {
    const auto dir = resolve_data_dir(options.data_dir);
    auto pair = name == "mnist-explore" ? load_mnist(dir) : load_cifar10(dir);
    if (options.label_noise > 0.0)
      pair.train = apply_label_noise(pair.train, {options.label_noise}, Seed{options.label_noise_seed});
    auto train = std::make_shared<const ImageDataset>(std::move(pair.train));
    auto test = std::make_shared<const ImageDataset>(std::move(pair.test));
    ExploreConfig cfg;
    cfg.window = options.window;
    cfg.max_steps = options.max_steps;
    cfg.validate(*train);
    return [train, test, cfg] { return EnvPtr(std::make_unique<ImageExploreEnv>(train, test, cfg)); };
  }
  throw std::invalid_argument("unknown env '" + name + "'");
}

EnvPtr make_env(const std::string& name, const EnvOptions& options) { return env_factory(name, options)(); }

}  // namespace rlprobe
