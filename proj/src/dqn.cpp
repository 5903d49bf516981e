#include <algorithm>
#include <cmath>
#include <limits>

#include "rlprobe/agents.hpp"

namespace rlprobe {

void DQNConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("dqn: lr must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("dqn: gamma must lie in [0, 1)");
  if (batch_size == 0 || replay_capacity == 0 || target_update_interval == 0 || train_freq == 0)
    throw std::invalid_argument("dqn: batch_size, replay_capacity, target_update_interval, train_freq must be positive");
  if (!(eps_end >= 0.0 && eps_start <= 1.0 && eps_end <= eps_start))
    throw std::invalid_argument("dqn: need 0 <= eps_end <= eps_start <= 1");
  if (!(eps_fraction >= 0.0 && eps_fraction <= 1.0)) throw std::invalid_argument("dqn: eps_fraction outside [0, 1]");
  if (hidden == 0 || hidden_layers == 0) throw std::invalid_argument("dqn: hidden sizes must be positive");
  if (!(huber_delta > 0.0)) throw std::invalid_argument("dqn: huber_delta must be positive");
  if (lambda_s < 0.0 || lambda_r < 0.0) throw std::invalid_argument("dqn: aux weights must be non-negative");
}

double epsilon_at(const DQNConfig& config, std::size_t episode, std::size_t total_episodes) {
  const auto decay = static_cast<double>(total_episodes) * config.eps_fraction;
  if (decay <= 0.0 || static_cast<double>(episode) >= decay) return config.eps_end;
  return config.eps_start + (config.eps_end - config.eps_start) * static_cast<double>(episode) / decay;
}

DQNLearner::DQNLearner(const EnvSpec& spec, DQNConfig config, Seed master) : spec_(spec), config_(config) {
  config_.validate();
  if (!spec.action_spec.is_discrete()) throw Unsupported("dqn requires a discrete action space");
  actions_ = spec.action_spec.count;
  obs_dim_ = spec.obs_layout.size();
  RandomStream init(master, StreamPurpose::kAgentInit);
  online_ = nn::Network<float>(q_architecture(spec, output_dim(), config_.hidden, config_.hidden_layers), init);
  target_ = online_;
  adam_ = nn::Adam<float>(online_.params(), nn::AdamConfig{config_.lr});
}

std::size_t DQNLearner::output_dim() const noexcept {
  return actions_ + (config_.model_based ? obs_dim_ + 1 : 0);
}

nn::Matrix<float> DQNLearner::outputs(std::span<const std::vector<float>> obs, bool target) const {
  nn::Matrix<float> x(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(obs_dim_));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].size() != obs_dim_) throw ContractViolation("dqn: observation size mismatch");
    std::copy(obs[i].begin(), obs[i].end(), x.row(static_cast<Eigen::Index>(i)).data());
  }
  return (target ? target_ : online_).forward(x);
}

std::vector<double> DQNLearner::q_values(const std::vector<float>& obs) const {
  const auto out = outputs(std::span(&obs, 1));
  std::vector<double> q(actions_);
  for (std::size_t a = 0; a < actions_; ++a) q[a] = out(0, static_cast<Eigen::Index>(a));
  return q;
}

std::size_t DQNLearner::greedy(const std::vector<float>& obs) const {
  const auto q = q_values(obs);
  return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

nn::Matrix<float> DQNLearner::stack(std::span<const Transition* const> batch, bool next) const {
  nn::Matrix<float> x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(obs_dim_));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& v = next ? batch[i]->next_obs : batch[i]->obs;
    if (v.size() != obs_dim_) throw ContractViolation("dqn: transition size mismatch");
    std::copy(v.begin(), v.end(), x.row(static_cast<Eigen::Index>(i)).data());
  }
  return x;
}

std::vector<double> DQNLearner::targets(std::span<const Transition* const> batch) const {
  const auto xn = stack(batch, true);
  const auto qn_online = online_.forward(xn);
  const auto qn_target = target_.forward(xn);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    y[i] = batch[i]->reward;
    if (batch[i]->terminal) continue;
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < static_cast<Eigen::Index>(actions_); ++a)
      if (qn_online(r, a) > qn_online(r, best)) best = a;
    y[i] += config_.gamma * static_cast<double>(qn_target(r, best));
  }
  return y;
}

DQNLearner::UpdateStats DQNLearner::update(std::span<const Transition* const> batch) {
  if (batch.empty()) throw ContractViolation("dqn: empty minibatch");
  const auto n = batch.size();
  const auto y = targets(batch);
  const auto x = stack(batch, false);
  nn::Network<float>::Cache cache;
  const auto out = online_.forward(x, &cache);

  std::vector<double> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (batch[i]->action >= actions_) throw ContractViolation("dqn: action index out of range");
    pred[i] = out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(batch[i]->action));
  }
  UpdateStats stats;
  const auto td = nn::huber_loss(pred, y, config_.huber_delta);
  stats.td_loss = td.loss;

  nn::Matrix<float> grad = nn::Matrix<float>::Zero(out.rows(), out.cols());
  for (std::size_t i = 0; i < n; ++i)
    grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(batch[i]->action)) = static_cast<float>(td.grad[i]);

  if (config_.model_based) {
    const auto d = obs_dim_;
    std::vector<double> ps(n * d), ts(n * d), pr(n), tr(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (std::size_t j = 0; j < d; ++j) {
        ps[i * d + j] = out(r, static_cast<Eigen::Index>(actions_ + j));
        ts[i * d + j] = batch[i]->next_obs[j];
      }
      pr[i] = out(r, static_cast<Eigen::Index>(actions_ + d));
      tr[i] = batch[i]->reward;
    }
    const auto ls = nn::mse_loss(ps, ts);
    const auto lr = nn::mse_loss(pr, tr);
    stats.state_loss = ls.loss;
    stats.reward_loss = lr.loss;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (std::size_t j = 0; j < d; ++j)
        grad(r, static_cast<Eigen::Index>(actions_ + j)) = static_cast<float>(config_.lambda_s * ls.grad[i * d + j]);
      grad(r, static_cast<Eigen::Index>(actions_ + d)) = static_cast<float>(config_.lambda_r * lr.grad[i]);
    }
  }
  if (!std::isfinite(stats.td_loss + stats.state_loss + stats.reward_loss))
    throw TrainingError("dqn: non-finite loss");

  auto tape = online_.backward(cache, grad);
  const double limit = config_.max_grad_norm > 0.0 ? config_.max_grad_norm : std::numeric_limits<double>::infinity();
  stats.grad_norm = nn::clip_grad_norm(tape, limit);
  try {
    adam_.step(online_.params(), tape);
  } catch (const nn::NonFiniteGradient& e) {
    throw TrainingError(std::string("dqn: ") + e.what());
  }
  return stats;
}

Policy DQNLearner::policy() const {
  return Policy(PolicyKind::kGreedyQ, online_, spec_.action_spec, spec_.obs_layout);
}

namespace {

bool cancelled(const TrainContext& ctx) {
  return ctx.cancel && ctx.cancel->load(std::memory_order_relaxed);
}

}  // namespace

TrainResult dqn_train(const EnvFactory& factory, const SeedProtocol& protocol, const DQNConfig& config,
                      std::size_t episodes, const TrainContext& ctx) {
  auto env = wrap_env(factory(), ctx.train_wrappers);
  DQNLearner learner(env->spec(), config, ctx.master_seed);
  ReplayBuffer buffer(config.replay_capacity);
  RandomStream explore(ctx.master_seed, StreamPurpose::kExplore);
  RandomStream replay(ctx.master_seed, StreamPurpose::kReplay);
  const auto snapshot = ctx.snapshot_json.empty() ? ctx.train_wrappers.to_json() : ctx.snapshot_json;

  TrainResult result;
  std::uint64_t steps = 0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    if (cancelled(ctx)) {
      result.cancelled = true;
      break;
    }
    const Seed seed = protocol.train_seed_for_episode(ep);
    const double eps = epsilon_at(config, ep, episodes);
    auto obs = to_float(env->reset(seed));
    double total = 0.0;
    while (true) {
      const bool random = explore.next_unit() < eps;
      const auto a = random ? static_cast<std::size_t>(explore.below(learner.actions())) : learner.greedy(obs);
      auto step = env->step(Action::discrete(a));
      total += step.reward;
      auto next = to_float(step.observation);
      buffer.push({obs, a, step.reward, next, step.terminal});
      ++steps;
      if (steps >= config.learning_starts && buffer.size() >= config.batch_size && steps % config.train_freq == 0) {
        const auto batch = buffer.sample(config.batch_size, replay);
        learner.update(batch);
      }
      if (steps % config.target_update_interval == 0) learner.sync_target();
      if (step.done()) break;
      obs = std::move(next);
    }
    result.episodes = ep + 1;
    result.log.append({ctx.run_id, steps, ep + 1, seed.value, role::kRollout, total, snapshot});
    if (ctx.eval_every > 0 && (ep + 1) % ctx.eval_every == 0 && ep + 1 < episodes)
      log_policy_evaluation(learner.policy(), factory, protocol, ctx, snapshot, steps, ep + 1, false, result.log);
  }
  result.steps = steps;
  result.policy = learner.policy();
  if (!result.cancelled)
    log_policy_evaluation(result.policy, factory, protocol, ctx, snapshot, steps, result.episodes, true, result.log);
  return result;
}

}  // namespace rlprobe
