#pragma once

#include <optional>
#include <vector>

#include "rlprobe/env.hpp"

namespace rlprobe {

struct RandomizedRewardConfig {
  std::size_t k = 3;
  double p_rand = 0.0;
  /// Range of the binned scalar; when unset the wrapped env's BinSpec is used.
  std::optional<BinSpec> range;
  void validate() const;
};

/// Per-bin randomization flags and multipliers for one seed.
struct BinTable {
  struct Bin {
    bool randomized = false;
    double beta = 1.0;
    friend bool operator==(const Bin&, const Bin&) = default;
  };
  std::vector<Bin> bins;
  friend bool operator==(const BinTable&, const BinTable&) = default;
};

struct NoiseConfig {
  double variance = 0.0;
};

struct MultiplierConfig {
  double m = 1.0;
};

/// For each bin in order: u ~ U[0,1), randomized = u < p_rand, then
/// beta ~ U[-1,1]. beta is drawn regardless of the flag, so raising p_rand
/// only reveals multipliers and never reshuffles them.
BinTable build_bin_table(Seed seed, const RandomizedRewardConfig& config);

/// clamp(floor((x - lo) * k / (hi - lo)), 0, k - 1).
std::size_t bin_index(double scalar, std::size_t k, BinSpec range);

/// Multiplies the raw reward by the active bin's beta if that bin is
/// randomized. `config.range` must be set. Rejects non-finite scalars.
double randomize_reward(double raw_reward, double state_scalar, const BinTable& table,
                        const RandomizedRewardConfig& config);

/// Adds independent N(0, variance) to every component. variance == 0
/// returns the observation unchanged.
Observation noisy_observe(const Observation& obs, NoiseConfig config, RandomStream& stream);

/// Base for decorators: forwards everything to the wrapped env.
class EnvWrapper : public Env {
 public:
  explicit EnvWrapper(EnvPtr inner) : inner_(std::move(inner)) {}

  std::string name() const override { return inner_->name(); }
  const EnvSpec& spec() const override { return inner_->spec(); }
  Observation reset(Seed seed) override { return inner_->reset(seed); }
  StepResult step(const Action& action) override { return inner_->step(action); }
  Observation observe() const override { return inner_->observe(); }
  std::optional<BinSpec> bin_spec() const override { return inner_->bin_spec(); }
  double binned_scalar() const override { return inner_->binned_scalar(); }
  void scale_initial_state(double m) override { inner_->scale_initial_state(m); }
  std::size_t steps_taken() const override { return inner_->steps_taken(); }
  bool done() const override { return inner_->done(); }

  Env& inner() noexcept { return *inner_; }
  const Env& inner() const noexcept { return *inner_; }

 protected:
  EnvPtr inner_;
};

/// Memorization probe: rewards are rescaled by per-seed bin multipliers.
/// The bin is chosen from the scalar of the state the action was taken in.
class RandomizedRewardEnv final : public EnvWrapper {
 public:
  RandomizedRewardEnv(EnvPtr inner, RandomizedRewardConfig config);

  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;

  const BinTable& table() const noexcept { return table_; }
  const RandomizedRewardConfig& config() const noexcept { return config_; }
  /// Raw reward of the last step, before randomization.
  double last_raw_reward() const noexcept { return last_raw_; }

 private:
  RandomizedRewardConfig config_;
  BinTable table_;
  double last_raw_ = 0.0;
};

/// Evaluation-time Gaussian observation noise. The env's own state is never
/// touched; the noise stream is keyed by the episode seed.
class ObservationNoiseEnv final : public EnvWrapper {
 public:
  ObservationNoiseEnv(EnvPtr inner, NoiseConfig config);

  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;
  Observation observe() const override { return last_obs_; }

 private:
  NoiseConfig config_;
  RandomStream stream_{Seed{0}, StreamPurpose::kObsNoise};
  Observation last_obs_;
};

/// Evaluation-time expansion of the initial state: s0' = m * s0.
class InitialStateMultiplierEnv final : public EnvWrapper {
 public:
  InitialStateMultiplierEnv(EnvPtr inner, MultiplierConfig config);
  Observation reset(Seed seed) override;

 private:
  MultiplierConfig config_;
};

/// Resets `env` on `seed`, scales the drawn initial state by m and returns the
/// resulting first observation. Throws Unsupported for image observations.
Observation multiply_initial_state(Env& env, MultiplierConfig config, Seed seed);

/// Settings of an evaluation- or training-time wrapper stack, for logs.
struct WrapperSettings {
  std::size_t k_bins = 3;
  double p_rand = 0.0;
  double sigma2 = 0.0;
  double init_mult = 1.0;
  bool reward_as_seen = false;
  std::string to_json() const;
};

/// Applies the wrappers implied by `settings` (identity settings add nothing).
EnvPtr wrap_env(EnvPtr env, const WrapperSettings& settings);

}  // namespace rlprobe
