#include "rlprobe/wrappers.hpp"

#include <cmath>
#include <json.hpp>

namespace rlprobe {

void RandomizedRewardConfig::validate() const {
  if (k < 1) throw std::invalid_argument("RandomizedRewardConfig: k must be >= 1");
  if (!(p_rand >= 0.0 && p_rand <= 1.0))
    throw std::invalid_argument("RandomizedRewardConfig: p_rand must lie in [0, 1]");
  if (range && !(range->lo < range->hi))
    throw std::invalid_argument("RandomizedRewardConfig: bin range requires lo < hi");
}

BinTable build_bin_table(Seed seed, const RandomizedRewardConfig& config) {
  config.validate();
  auto rng = rng_stream(seed, StreamPurpose::kRewardRand);
  BinTable table;
  table.bins.resize(config.k);
  for (auto& bin : table.bins) {
    bin.randomized = rng.next_unit() < config.p_rand;
    bin.beta = rng.uniform(-1.0, 1.0);
  }
  return table;
}

std::size_t bin_index(double scalar, std::size_t k, BinSpec range) {
  if (!std::isfinite(scalar)) throw std::invalid_argument("bin_index: non-finite state scalar");
  const double raw = std::floor((scalar - range.lo) * static_cast<double>(k) / (range.hi - range.lo));
  if (raw < 0.0) return 0;
  if (raw >= static_cast<double>(k)) return k - 1;
  return static_cast<std::size_t>(raw);
}

double randomize_reward(double raw_reward, double state_scalar, const BinTable& table,
                        const RandomizedRewardConfig& config) {
  if (!config.range) throw std::invalid_argument("randomize_reward: bin range not set");
  if (table.bins.size() != config.k) throw std::invalid_argument("randomize_reward: table/config size mismatch");
  const auto& bin = table.bins[bin_index(state_scalar, config.k, *config.range)];
  return bin.randomized ? bin.beta * raw_reward : raw_reward;
}

Observation noisy_observe(const Observation& obs, NoiseConfig config, RandomStream& stream) {
  if (!(config.variance >= 0.0)) throw std::invalid_argument("noisy_observe: variance must be non-negative");
  if (config.variance == 0.0) return obs;
  Observation out = obs;
  for (auto& v : out.data) v = v + stream.gaussian(0.0, config.variance);
  return out;
}

// ---------------------------------------------------------------- randomized reward

RandomizedRewardEnv::RandomizedRewardEnv(EnvPtr inner, RandomizedRewardConfig config)
    : EnvWrapper(std::move(inner)), config_(std::move(config)) {
  if (!config_.range) {
    const auto spec = inner_->bin_spec();
    if (!spec) throw Unsupported(inner_->name() + ": no registered bin dimension for randomized reward");
    config_.range = spec;
  }
  config_.validate();
}

Observation RandomizedRewardEnv::reset(Seed seed) {
  table_ = build_bin_table(seed, config_);
  return inner_->reset(seed);
}

StepResult RandomizedRewardEnv::step(const Action& action) {
  const double scalar = inner_->binned_scalar();
  auto r = inner_->step(action);
  last_raw_ = r.reward;
  r.reward = randomize_reward(r.reward, scalar, table_, config_);
  return r;
}

// ---------------------------------------------------------------- observation noise

ObservationNoiseEnv::ObservationNoiseEnv(EnvPtr inner, NoiseConfig config)
    : EnvWrapper(std::move(inner)), config_(config) {
  if (!(config_.variance >= 0.0)) throw std::invalid_argument("NoiseConfig: variance must be non-negative");
}

Observation ObservationNoiseEnv::reset(Seed seed) {
  stream_ = RandomStream(seed, StreamPurpose::kObsNoise);
  last_obs_ = noisy_observe(inner_->reset(seed), config_, stream_);
  return last_obs_;
}

StepResult ObservationNoiseEnv::step(const Action& action) {
  auto r = inner_->step(action);
  r.observation = noisy_observe(r.observation, config_, stream_);
  last_obs_ = r.observation;
  return r;
}

// ---------------------------------------------------------------- initial-state multiplier

InitialStateMultiplierEnv::InitialStateMultiplierEnv(EnvPtr inner, MultiplierConfig config)
    : EnvWrapper(std::move(inner)), config_(config) {
  if (!(config_.m > 0.0)) throw std::invalid_argument("MultiplierConfig: m must be positive");
  if (inner_->spec().obs_layout.is_image())
    throw Unsupported(inner_->name() + ": initial-state multiplier is undefined for image observations");
}

Observation InitialStateMultiplierEnv::reset(Seed seed) {
  return multiply_initial_state(*inner_, config_, seed);
}

Observation multiply_initial_state(Env& env, MultiplierConfig config, Seed seed) {
  if (env.spec().obs_layout.is_image())
    throw Unsupported(env.name() + ": initial-state multiplier is undefined for image observations");
  env.reset(seed);
  env.scale_initial_state(config.m);
  return env.observe();
}

// ---------------------------------------------------------------- stacks

std::string WrapperSettings::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k_bins;
  j["p_rand"] = p_rand;
  j["sigma2"] = sigma2;
  j["m"] = init_mult;
  if (reward_as_seen) j["reward"] = "as_seen";
  return j.dump();
}

EnvPtr wrap_env(EnvPtr env, const WrapperSettings& settings) {
  if (settings.p_rand > 0.0)
    env = std::make_unique<RandomizedRewardEnv>(std::move(env),
                                                RandomizedRewardConfig{settings.k_bins, settings.p_rand, {}});
  if (settings.init_mult != 1.0)
    env = std::make_unique<InitialStateMultiplierEnv>(std::move(env), MultiplierConfig{settings.init_mult});
  if (settings.sigma2 != 0.0)
    env = std::make_unique<ObservationNoiseEnv>(std::move(env), NoiseConfig{settings.sigma2});
  return env;
}

}  // namespace rlprobe
