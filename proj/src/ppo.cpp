#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlprobe/agents.hpp"

namespace rlprobe {

void PPOConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("ppo: lr must be positive");
  if (rollout_length == 0 || minibatch == 0 || epochs == 0)
    throw std::invalid_argument("ppo: rollout_length, minibatch, epochs must be positive");
  if (rollout_length % minibatch != 0) throw std::invalid_argument("ppo: rollout_length must be divisible by minibatch");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ppo: gamma must lie in [0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("ppo: gae_lambda outside [0, 1]");
  if (!(clip > 0.0)) throw std::invalid_argument("ppo: clip must be positive");
  if (hidden == 0 || hidden_layers == 0) throw std::invalid_argument("ppo: hidden sizes must be positive");
  if (lambda_s < 0.0 || lambda_r < 0.0 || entropy_coef < 0.0)
    throw std::invalid_argument("ppo: loss weights must be non-negative");
}

std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   std::span<const double> next_values, std::span<const std::uint8_t> terminal,
                                   std::span<const std::uint8_t> episode_end, double gamma, double lambda) {
  const auto n = rewards.size();
  if (values.size() != n || next_values.size() != n || terminal.size() != n || episode_end.size() != n)
    throw std::invalid_argument("gae_advantages: input lengths differ");
  std::vector<double> adv(n);
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double bootstrap = terminal[k] ? 0.0 : gamma * next_values[k];
    const double delta = rewards[k] + bootstrap - values[k];
    const bool cut = episode_end[k] || terminal[k];
    running = delta + (cut ? 0.0 : gamma * lambda * running);
    adv[k] = running;
  }
  return adv;
}

namespace {

nn::Matrix<float> rows(std::span<const std::vector<float>> obs, std::size_t dim) {
  nn::Matrix<float> x(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].size() != dim) throw ContractViolation("ppo: observation size mismatch");
    std::copy(obs[i].begin(), obs[i].end(), x.row(static_cast<Eigen::Index>(i)).data());
  }
  return x;
}

std::vector<double> row_vec(const nn::Matrix<float>& m, Eigen::Index r, std::size_t cols) {
  std::vector<double> v(cols);
  for (std::size_t j = 0; j < cols; ++j) v[j] = m(r, static_cast<Eigen::Index>(j));
  return v;
}

}  // namespace

PPOLearner::PPOLearner(const EnvSpec& spec, PPOConfig config, Seed master) : spec_(spec), config_(config) {
  config_.validate();
  discrete_ = spec.action_spec.is_discrete();
  act_dim_ = discrete_ ? spec.action_spec.count : spec.action_spec.dim();
  obs_dim_ = spec.obs_layout.size();
  RandomStream init(master, StreamPurpose::kAgentInit);
  actor_ = nn::Network<float>(q_architecture(spec, act_dim_, config_.hidden, config_.hidden_layers), init, 0.01);
  critic_ = nn::Network<float>(q_architecture(spec, critic_outputs(), config_.hidden, config_.hidden_layers), init);
  log_std_.emplace_back(std::vector<std::size_t>{discrete_ ? 0 : act_dim_});
  std::fill(log_std_.front().data.begin(), log_std_.front().data.end(), config_.init_log_std);
  actor_opt_ = nn::Adam<float>(actor_.params(), nn::AdamConfig{config_.lr});
  critic_opt_ = nn::Adam<float>(critic_.params(), nn::AdamConfig{config_.lr});
  log_std_opt_ = nn::Adam<double>(log_std_, nn::AdamConfig{config_.lr});
}

std::size_t PPOLearner::critic_outputs() const noexcept {
  return 1 + (config_.model_based ? obs_dim_ + 1 : 0);
}

PPOLearner::Sample PPOLearner::sample(const std::vector<float>& obs, RandomStream& rng) const {
  const auto out = actor_.forward(rows(std::span(&obs, 1), obs_dim_));
  const auto head = row_vec(out, 0, act_dim_);
  Sample s;
  if (discrete_) {
    const auto a = nn::categorical_sample(head, rng);
    s.action = Action::discrete(a);
    s.logp = nn::categorical_logprob(head, a);
  } else {
    const auto& ls = log_std();
    std::vector<double> a(act_dim_);
    for (std::size_t j = 0; j < act_dim_; ++j) a[j] = head[j] + std::exp(ls[j]) * rng.gaussian(0.0, 1.0);
    s.logp = nn::gaussian_logprob(head, ls, a);
    s.action = Action::continuous(std::move(a));
  }
  return s;
}

double PPOLearner::logp(const std::vector<float>& obs, const Action& action) const {
  const auto out = actor_.forward(rows(std::span(&obs, 1), obs_dim_));
  const auto head = row_vec(out, 0, act_dim_);
  return discrete_ ? nn::categorical_logprob(head, action.index) : nn::gaussian_logprob(head, log_std(), action.values);
}

std::vector<double> PPOLearner::values(std::span<const std::vector<float>> obs) const {
  const auto out = critic_.forward(rows(obs, obs_dim_));
  std::vector<double> v(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) v[i] = out(static_cast<Eigen::Index>(i), 0);
  return v;
}

void PPOLearner::finish_batch(RolloutBatch& batch) const {
  const auto v = values(batch.obs);
  const auto vn = values(batch.next_obs);
  batch.advantages =
      gae_advantages(batch.rewards, v, vn, batch.terminal, batch.episode_end, config_.gamma, config_.gae_lambda);
  batch.returns.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) batch.returns[i] = batch.advantages[i] + v[i];
}

std::pair<double, double> PPOLearner::aux_losses(const RolloutBatch& batch) const {
  if (!config_.model_based) return {0.0, 0.0};
  const auto out = critic_.forward(rows(batch.obs, obs_dim_));
  const auto n = batch.size();
  std::vector<double> ps(n * obs_dim_), ts(n * obs_dim_), pr(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < obs_dim_; ++j) {
      ps[i * obs_dim_ + j] = out(r, static_cast<Eigen::Index>(1 + j));
      ts[i * obs_dim_ + j] = batch.next_obs[i][j];
    }
    pr[i] = out(r, static_cast<Eigen::Index>(1 + obs_dim_));
  }
  return {nn::mse_loss(ps, ts).loss, nn::mse_loss(pr, batch.rewards).loss};
}

PPOLearner::UpdateStats PPOLearner::update(const RolloutBatch& batch, RandomStream& shuffle) {
  const auto n = batch.size();
  if (n == 0 || batch.advantages.size() != n || batch.returns.size() != n)
    throw ContractViolation("ppo: batch not finished (call finish_batch first)");

  std::vector<double> adv = batch.advantages;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (auto& a : adv) a = (a - mean) / (sd + 1e-8);

  const auto mb = std::min(config_.minibatch, n);
  std::vector<std::size_t> order(n);
  UpdateStats stats;
  std::size_t updates = 0;
  bool first = true;

  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle.shuffle(std::span(order));
    for (std::size_t start = 0; start + mb <= n; start += mb) {
      const auto m = static_cast<Eigen::Index>(mb);
      nn::Matrix<float> x(m, static_cast<Eigen::Index>(obs_dim_));
      std::vector<double> logp_old(mb), adv_mb(mb), ret_mb(mb);
      for (std::size_t i = 0; i < mb; ++i) {
        const auto k = order[start + i];
        std::copy(batch.obs[k].begin(), batch.obs[k].end(), x.row(static_cast<Eigen::Index>(i)).data());
        logp_old[i] = batch.logp[k];
        adv_mb[i] = adv[k];
        ret_mb[i] = batch.returns[k];
      }

      nn::Network<float>::Cache actor_cache, critic_cache;
      const auto head = actor_.forward(x, &actor_cache);
      const auto cout = critic_.forward(x, &critic_cache);

      std::vector<double> logp_new(mb), values(mb);
      double entropy = 0.0;
      const auto& ls = log_std();
      for (std::size_t i = 0; i < mb; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const auto h = row_vec(head, r, act_dim_);
        const auto& act = batch.actions[order[start + i]];
        if (discrete_) {
          logp_new[i] = nn::categorical_logprob(h, act.index);
          entropy += nn::categorical_entropy(h);
        } else {
          logp_new[i] = nn::gaussian_logprob(h, ls, act.values);
        }
        values[i] = cout(r, 0);
      }
      entropy = discrete_ ? entropy / static_cast<double>(mb) : nn::gaussian_entropy(ls);

      if (first) {
        for (std::size_t i = 0; i < mb; ++i)
          stats.first_ratio_max_dev = std::max(stats.first_ratio_max_dev, std::abs(std::exp(logp_new[i] - logp_old[i]) - 1.0));
        first = false;
      }

      const auto loss = nn::ppo_loss({logp_new, logp_old, adv_mb, values, ret_mb, entropy, config_.clip,
                                      config_.entropy_coef});

      // actor and log std
      nn::Matrix<float> g_head = nn::Matrix<float>::Zero(head.rows(), head.cols());
      std::vector<double> g_ls(discrete_ ? 0 : act_dim_, 0.0);
      for (std::size_t i = 0; i < mb; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const auto h = row_vec(head, r, act_dim_);
        const auto& act = batch.actions[order[start + i]];
        if (discrete_) {
          const auto dl = nn::categorical_logprob_grad(h, act.index);
          const auto de = nn::categorical_entropy_grad(h);
          for (std::size_t j = 0; j < act_dim_; ++j)
            g_head(r, static_cast<Eigen::Index>(j)) = static_cast<float>(
                loss.d_logp_new[i] * dl[j] + loss.d_entropy * de[j] / static_cast<double>(mb));
        } else {
          std::vector<double> dm(act_dim_), ds(act_dim_);
          nn::gaussian_logprob_grad(h, ls, act.values, dm, ds);
          for (std::size_t j = 0; j < act_dim_; ++j) {
            g_head(r, static_cast<Eigen::Index>(j)) = static_cast<float>(loss.d_logp_new[i] * dm[j]);
            g_ls[j] += loss.d_logp_new[i] * ds[j];
          }
        }
      }
      for (auto& g : g_ls) g += loss.d_entropy;  // d entropy / d log_std_j = 1

      // critic, with optional model heads
      nn::Matrix<float> g_crit = nn::Matrix<float>::Zero(cout.rows(), cout.cols());
      for (std::size_t i = 0; i < mb; ++i) g_crit(static_cast<Eigen::Index>(i), 0) = static_cast<float>(loss.d_values[i]);
      if (config_.model_based) {
        const auto d = obs_dim_;
        std::vector<double> ps(mb * d), ts(mb * d), pr(mb), tr(mb);
        for (std::size_t i = 0; i < mb; ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          const auto k = order[start + i];
          for (std::size_t j = 0; j < d; ++j) {
            ps[i * d + j] = cout(r, static_cast<Eigen::Index>(1 + j));
            ts[i * d + j] = batch.next_obs[k][j];
          }
          pr[i] = cout(r, static_cast<Eigen::Index>(1 + d));
          tr[i] = batch.rewards[k];
        }
        const auto lsx = nn::mse_loss(ps, ts);
        const auto lrx = nn::mse_loss(pr, tr);
        stats.state_loss += lsx.loss;
        stats.reward_loss += lrx.loss;
        for (std::size_t i = 0; i < mb; ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          for (std::size_t j = 0; j < d; ++j)
            g_crit(r, static_cast<Eigen::Index>(1 + j)) = static_cast<float>(config_.lambda_s * lsx.grad[i * d + j]);
          g_crit(r, static_cast<Eigen::Index>(1 + d)) = static_cast<float>(config_.lambda_r * lrx.grad[i]);
        }
      }
      if (!std::isfinite(loss.total)) throw TrainingError("ppo: non-finite loss");

      auto actor_tape = actor_.backward(actor_cache, g_head);
      auto critic_tape = critic_.backward(critic_cache, g_crit);

      // actor parameters and log std are clipped as one group
      if (config_.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const auto& t : actor_tape)
          for (float v : t.data) sq += static_cast<double>(v) * v;
        for (double v : g_ls) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > config_.max_grad_norm) {
          const double scale = config_.max_grad_norm / norm;
          for (auto& t : actor_tape)
            for (auto& v : t.data) v = static_cast<float>(v * scale);
          for (auto& v : g_ls) v *= scale;
        }
        nn::clip_grad_norm(critic_tape, config_.max_grad_norm);
      }

      try {
        actor_opt_.step(actor_.params(), actor_tape);
        critic_opt_.step(critic_.params(), critic_tape);
        if (!discrete_) {
          nn::GradientTape<double> tape(1, nn::Tensor<double>({act_dim_}));
          tape.front().data.assign(g_ls.begin(), g_ls.end());
          log_std_opt_.step(log_std_, tape);
        }
      } catch (const nn::NonFiniteGradient& e) {
        throw TrainingError(std::string("ppo: ") + e.what());
      }

      stats.policy_loss += -loss.policy_term;
      stats.value_loss += loss.value_term;
      stats.entropy += entropy;
      stats.clip_fraction += loss.clip_fraction;
      ++updates;
    }
  }
  if (updates > 0) {
    const double k = static_cast<double>(updates);
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.state_loss /= k;
    stats.reward_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
  }
  return stats;
}

Policy PPOLearner::policy() const {
  if (discrete_) return Policy(PolicyKind::kCategorical, actor_, spec_.action_spec, spec_.obs_layout);
  return Policy(PolicyKind::kGaussian, actor_, spec_.action_spec, spec_.obs_layout,
                {log_std().begin(), log_std().end()});
}

TrainResult ppo_train(const EnvFactory& factory, const SeedProtocol& protocol, const PPOConfig& config,
                      std::size_t total_steps, const TrainContext& ctx) {
  auto env = wrap_env(factory(), ctx.train_wrappers);
  PPOLearner learner(env->spec(), config, ctx.master_seed);
  RandomStream act_rng(ctx.master_seed, StreamPurpose::kActionSample);
  RandomStream mb_rng(ctx.master_seed, StreamPurpose::kMinibatch);
  const auto snapshot = ctx.snapshot_json.empty() ? ctx.train_wrappers.to_json() : ctx.snapshot_json;
  const std::size_t rollouts = (total_steps + config.rollout_length - 1) / config.rollout_length;

  TrainResult result;
  std::uint64_t steps = 0;
  std::size_t episode = 0;
  Seed seed = protocol.train_seed_for_episode(0);
  auto obs = to_float(env->reset(seed));
  double ep_return = 0.0;

  for (std::size_t k = 0; k < rollouts; ++k) {
    if (ctx.cancel && ctx.cancel->load(std::memory_order_relaxed)) {
      result.cancelled = true;
      break;
    }
    RolloutBatch batch;
    for (std::size_t t = 0; t < config.rollout_length; ++t) {
      auto s = learner.sample(obs, act_rng);
      auto step = env->step(s.action);
      auto next = to_float(step.observation);
      ++steps;
      ep_return += step.reward;
      batch.obs.push_back(obs);
      batch.next_obs.push_back(next);
      batch.actions.push_back(std::move(s.action));
      batch.logp.push_back(s.logp);
      batch.rewards.push_back(step.reward);
      batch.terminal.push_back(step.terminal ? 1 : 0);
      batch.episode_end.push_back(step.done() || t + 1 == config.rollout_length ? 1 : 0);
      if (step.done()) {
        ++episode;
        result.log.append({ctx.run_id, steps, episode, seed.value, role::kRollout, ep_return, snapshot});
        seed = protocol.train_seed_for_episode(episode);
        obs = to_float(env->reset(seed));
        ep_return = 0.0;
      } else {
        obs = std::move(next);
      }
    }
    learner.finish_batch(batch);
    learner.update(batch, mb_rng);
    if (ctx.eval_every > 0 && (k + 1) % ctx.eval_every == 0 && k + 1 < rollouts)
      log_policy_evaluation(learner.policy(), factory, protocol, ctx, snapshot, steps, episode, false, result.log);
  }
  result.steps = steps;
  result.episodes = episode;
  result.policy = learner.policy();
  if (!result.cancelled)
    log_policy_evaluation(result.policy, factory, protocol, ctx, snapshot, steps, episode, true, result.log);
  return result;
}

}  // namespace rlprobe
