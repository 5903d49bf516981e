#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rlprobe/env.hpp"
#include "rlprobe/metrics.hpp"
#include "rlprobe/nn.hpp"
#include "rlprobe/wrappers.hpp"

namespace rlprobe {

using EnvFactory = std::function<EnvPtr()>;

/// Raised when training cannot continue (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<float> to_float(const Observation& obs);

// ---------------------------------------------------------------- replay

struct Transition {
  std::vector<float> obs;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<float> next_obs;
  bool terminal = false;  // truncation is not terminal: it still bootstraps
};

/// Fixed-capacity FIFO ring with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// n draws with replacement, uniform over stored transitions.
  std::vector<const Transition*> sample(std::size_t n, RandomStream& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot the next push overwrites once full
  std::vector<Transition> items_;
};

// ---------------------------------------------------------------- policy

enum class PolicyKind : std::uint32_t { kGreedyQ = 0, kGaussian = 1, kCategorical = 2 };

/// Frozen network plus a deterministic action rule: argmax over the first
/// `action_outputs` columns, or the Gaussian mean clipped to the bounds.
class Policy {
 public:
  Policy() = default;
  Policy(PolicyKind kind, nn::Network<float> net, ActionSpec action_spec, ObsLayout obs_layout,
         std::vector<double> log_std = {});

  Action act(const Observation& obs) const;
  std::vector<Action> act_batch(const nn::Matrix<float>& obs) const;
  /// Throws Unsupported if `spec` does not match the policy's shapes.
  void check_compatible(const EnvSpec& spec) const;

  PolicyKind kind() const noexcept { return kind_; }
  const nn::Network<float>& network() const noexcept { return net_; }
  const ActionSpec& action_spec() const noexcept { return action_spec_; }
  const ObsLayout& obs_layout() const noexcept { return obs_layout_; }
  const std::vector<double>& log_std() const noexcept { return log_std_; }
  std::size_t action_outputs() const noexcept;

 private:
  PolicyKind kind_ = PolicyKind::kGreedyQ;
  nn::Network<float> net_;
  ActionSpec action_spec_;
  ObsLayout obs_layout_;
  std::vector<double> log_std_;
};

/// Policy checkpoint: "RLPP", u32 version, u32 kind, action spec, obs layout,
/// log_std, then the network in the nn checkpoint format.
void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);

// ---------------------------------------------------------------- evaluation

struct EvalRequest {
  WrapperSettings wrappers;            // evaluation-time wrapper stack
  TrajectoryLog* trajectories = nullptr;
  std::string run_id;
  std::string role;
};

/// One deterministic episode per seed; undiscounted returns in seed order.
std::vector<double> evaluate(const Policy& policy, const EnvFactory& factory, std::span<const Seed> seeds,
                             const EvalRequest& request = {});

/// Uniform-random actions, one episode per seed (baseline for comparisons).
std::vector<double> evaluate_random(const EnvFactory& factory, std::span<const Seed> seeds, Seed master,
                                    const WrapperSettings& wrappers = {});

// ---------------------------------------------------------------- training context

struct TrainContext {
  std::string run_id = "run";
  Seed master_seed{0};
  /// Applied to the training env; evaluation on `train`/`test` uses the bare env.
  WrapperSettings train_wrappers;
  /// Evaluate every this many episodes (DQN) or rollouts (PPO); 0 evaluates
  /// only at the end. The final policy is always evaluated.
  std::size_t eval_every = 0;
  /// Written into every record's wrapper_json; defaults to train_wrappers.to_json().
  std::string snapshot_json;
  /// Receives the per-step rewards of the final evaluation.
  TrajectoryLog* trajectories = nullptr;
  const std::atomic<bool>* cancel = nullptr;
};

struct TrainResult {
  Policy policy;
  MetricsLog log;
  std::uint64_t steps = 0;
  std::uint64_t episodes = 0;
  bool cancelled = false;
};

/// Appends greedy returns on the train and test seeds (original reward) and,
/// when training used a randomized reward, on the train seeds under it.
void log_policy_evaluation(const Policy& policy, const EnvFactory& factory, const SeedProtocol& protocol,
                           const TrainContext& ctx, const std::string& snapshot, std::uint64_t steps,
                           std::uint64_t episodes, bool final, MetricsLog& log);

// ---------------------------------------------------------------- DQN

struct DQNConfig {
  double lr = 3e-3;
  double gamma = 0.99;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 1'000'000;
  std::size_t target_update_interval = 1000;  // environment steps
  std::size_t learning_starts = 1000;         // steps before the first update
  std::size_t train_freq = 1;                 // env steps per update
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.1;  // of the episode budget
  std::size_t hidden = 512;
  std::size_t hidden_layers = 2;
  double huber_delta = 1.0;
  double max_grad_norm = 10.0;  // <= 0 disables clipping
  bool model_based = false;
  double lambda_s = 1.0;
  double lambda_r = 1.0;
  void validate() const;
};

/// Online/target network pair with the Double-DQN update. With
/// model_based the output row is [Q (|A|), next state (obs_dim), reward (1)].
class DQNLearner {
 public:
  DQNLearner(const EnvSpec& spec, DQNConfig config, Seed master);

  struct UpdateStats {
    double td_loss = 0.0;
    double state_loss = 0.0;
    double reward_loss = 0.0;
    double grad_norm = 0.0;
  };

  nn::Matrix<float> outputs(std::span<const std::vector<float>> obs, bool target = false) const;
  std::vector<double> q_values(const std::vector<float>& obs) const;
  std::size_t greedy(const std::vector<float>& obs) const;
  /// r + gamma * Q_target(s', argmax_a Q_online(s', a)), or r when terminal.
  std::vector<double> targets(std::span<const Transition* const> batch) const;
  UpdateStats update(std::span<const Transition* const> batch);
  void sync_target() { target_ = online_; }

  std::size_t actions() const noexcept { return actions_; }
  std::size_t obs_dim() const noexcept { return obs_dim_; }
  std::size_t output_dim() const noexcept;
  const nn::Network<float>& online() const noexcept { return online_; }
  const nn::Network<float>& target() const noexcept { return target_; }
  Policy policy() const;

 private:
  nn::Matrix<float> stack(std::span<const Transition* const> batch, bool next) const;

  EnvSpec spec_;
  DQNConfig config_;
  std::size_t actions_ = 0;
  std::size_t obs_dim_ = 0;
  nn::Network<float> online_;
  nn::Network<float> target_;
  nn::Adam<float> adam_;
};

nn::Architecture q_architecture(const EnvSpec& spec, std::size_t outputs, std::size_t hidden,
                                std::size_t hidden_layers);

/// Epsilon for a given training episode under the linear schedule.
double epsilon_at(const DQNConfig& config, std::size_t episode, std::size_t total_episodes);

TrainResult dqn_train(const EnvFactory& factory, const SeedProtocol& protocol, const DQNConfig& config,
                      std::size_t episodes, const TrainContext& context = {});

// ---------------------------------------------------------------- PPO

struct PPOConfig {
  double lr = 3e-4;
  std::size_t rollout_length = 2048;
  std::size_t epochs = 10;
  std::size_t minibatch = 32;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  double init_log_std = 0.0;
  std::size_t hidden = 512;
  std::size_t hidden_layers = 2;
  bool model_based = false;
  double lambda_s = 1.0;
  double lambda_r = 1.0;
  void validate() const;
};

/// GAE advantages. values[t] = V(s_t), next_values[t] = V(s_{t+1}) (ignored
/// when terminal[t]); episode_end[t] stops the recursion (terminal or
/// truncated or the end of the rollout).
std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   std::span<const double> next_values, std::span<const std::uint8_t> terminal,
                                   std::span<const std::uint8_t> episode_end, double gamma, double lambda);

/// One fixed batch of on-policy data.
struct RolloutBatch {
  std::vector<std::vector<float>> obs;
  std::vector<std::vector<float>> next_obs;
  std::vector<Action> actions;
  std::vector<double> logp;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;
  std::vector<std::uint8_t> episode_end;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::size_t size() const noexcept { return obs.size(); }
};

/// Actor (mean or logits, final gain 0.01, state-independent log std) and
/// critic ([V] or [V, next state, reward] when model-based).
class PPOLearner {
 public:
  PPOLearner(const EnvSpec& spec, PPOConfig config, Seed master);

  struct Sample {
    Action action;
    double logp = 0.0;
  };
  Sample sample(const std::vector<float>& obs, RandomStream& rng) const;
  double logp(const std::vector<float>& obs, const Action& action) const;
  std::vector<double> values(std::span<const std::vector<float>> obs) const;
  /// Fills advantages and returns from the critic.
  void finish_batch(RolloutBatch& batch) const;

  struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double state_loss = 0.0;
    double reward_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double first_ratio_max_dev = 0.0;  // max |ratio - 1| on the very first minibatch
  };
  /// `epochs` passes of shuffled minibatch updates.
  UpdateStats update(const RolloutBatch& batch, RandomStream& shuffle);
  /// Critic-only auxiliary losses (state, reward) on `batch`.
  std::pair<double, double> aux_losses(const RolloutBatch& batch) const;

  const nn::Network<float>& actor() const noexcept { return actor_; }
  const nn::Network<float>& critic() const noexcept { return critic_; }
  std::span<const double> log_std() const noexcept { return log_std_.front().data; }
  std::size_t critic_outputs() const noexcept;
  Policy policy() const;

 private:
  EnvSpec spec_;
  PPOConfig config_;
  bool discrete_ = false;
  std::size_t act_dim_ = 0;
  std::size_t obs_dim_ = 0;
  nn::Network<float> actor_;
  nn::Network<float> critic_;
  std::vector<nn::Tensor<double>> log_std_;  // one tensor, empty for discrete actions
  nn::Adam<float> actor_opt_;
  nn::Adam<float> critic_opt_;
  nn::Adam<double> log_std_opt_;
};

TrainResult ppo_train(const EnvFactory& factory, const SeedProtocol& protocol, const PPOConfig& config,
                      std::size_t total_steps, const TrainContext& context = {});

}  // namespace rlprobe
