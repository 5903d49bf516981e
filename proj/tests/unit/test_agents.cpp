#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "rlprobe/agents.hpp"
#include "rlprobe/arm.hpp"
#include "rlprobe/classic.hpp"

using namespace rlprobe;

namespace {

EnvFactory cartpole_env() {
  return [] { return EnvPtr(std::make_unique<CartpoleEnv>()); };
}
EnvFactory reacher() {
  return [] { return EnvPtr(std::make_unique<ReacherEnv>()); };
}

DQNConfig small_dqn() {
  DQNConfig c;
  c.hidden = 32;
  c.batch_size = 16;
  c.learning_starts = 100;
  c.target_update_interval = 200;
  c.replay_capacity = 5000;
  return c;
}

PPOConfig small_ppo() {
  PPOConfig c;
  c.hidden = 32;
  c.rollout_length = 256;
  c.epochs = 4;
  c.minibatch = 32;
  return c;
}

Transition make_transition(const std::vector<float>& obs, std::size_t a, double r, bool terminal,
                           const std::vector<float>& next) {
  return {obs, a, r, next, terminal};
}

RolloutBatch collect(const PPOLearner& learner, Env& env, std::size_t n, Seed seed) {
  RolloutBatch b;
  RandomStream rng(seed, StreamPurpose::kActionSample);
  auto obs = to_float(env.reset(seed));
  for (std::size_t t = 0; t < n; ++t) {
    const auto s = learner.sample(obs, rng);
    const auto step = env.step(s.action);
    auto next = to_float(step.observation);
    b.obs.push_back(obs);
    b.next_obs.push_back(next);
    b.actions.push_back(s.action);
    b.logp.push_back(s.logp);
    b.rewards.push_back(step.reward);
    b.terminal.push_back(step.terminal);
    b.episode_end.push_back(step.done() || t + 1 == n);
    obs = step.done() ? to_float(env.reset(seed)) : next;
  }
  learner.finish_batch(b);
  return b;
}

}  // namespace

TEST_SUITE("agents") {

TEST_CASE("replay buffer keeps the most recent transitions in order") {
  ReplayBuffer buf(5);
  for (std::size_t i = 0; i < 12; ++i) buf.push(make_transition({static_cast<float>(i)}, 0, 0.0, false, {0.0f}));
  REQUIRE(buf.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(buf.at(i).obs[0] == static_cast<float>(7 + i));
  RandomStream r(Seed{0}, StreamPurpose::kReplay);
  for (const auto* t : buf.sample(100, r)) REQUIRE(t->obs[0] >= 7.0f);
  CHECK_THROWS(ReplayBuffer(0));
}

TEST_CASE("terminal transitions do not bootstrap") {
  DQNLearner l(CartpoleEnv().spec(), small_dqn(), Seed{0});
  const auto t = make_transition({0.1f, 0.0f, 0.0f, 0.0f}, 1, 1.0, true, {0.2f, 0.1f, 0.0f, 0.0f});
  const Transition* batch[] = {&t};
  CHECK(l.targets(batch)[0] == 1.0);
}

TEST_CASE("double-DQN target never exceeds the max target bootstrap") {
  auto cfg = small_dqn();
  DQNLearner l(CartpoleEnv().spec(), cfg, Seed{1});
  RandomStream r(Seed{2}, 1u);
  std::vector<Transition> ts;
  for (int i = 0; i < 64; ++i) {
    std::vector<float> a(4), b(4);
    for (auto& v : a) v = static_cast<float>(r.gaussian(0.0, 0.1));
    for (auto& v : b) v = static_cast<float>(r.gaussian(0.0, 0.1));
    ts.push_back(make_transition(a, r.below(2), 1.0, false, b));
  }
  // make target and online differ
  for (int i = 0; i < 20; ++i) {
    std::vector<const Transition*> batch;
    for (auto& t : ts) batch.push_back(&t);
    l.update(batch);
  }
  std::vector<const Transition*> batch;
  for (auto& t : ts) batch.push_back(&t);
  const auto y = l.targets(batch);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::vector<float>* next = &ts[i].next_obs;
    const auto q = l.outputs(std::span(next, 1), true);
    const double max_q = std::max(q(0, 0), q(0, 1));
    REQUIRE(y[i] <= ts[i].reward + cfg.gamma * max_q + 1e-5 * (1.0 + std::abs(max_q)));  // float network
  }
}

TEST_CASE("repeated updates on one transition drive Q(s, a) to its target") {
  auto cfg = small_dqn();
  cfg.lr = 1e-3;
  DQNLearner l(CartpoleEnv().spec(), cfg, Seed{3});
  const auto t = make_transition({0.05f, -0.02f, 0.01f, 0.03f}, 1, 0.7, true, {0.0f, 0.0f, 0.0f, 0.0f});
  std::vector<const Transition*> batch(16, &t);
  for (int i = 0; i < 3000; ++i) l.update(batch);
  CHECK(std::abs(l.q_values(t.obs)[1] - 0.7) < 1e-3);
}

TEST_CASE("model-based heads shape and auxiliary loss on one transition") {
  auto cfg = small_dqn();
  cfg.model_based = true;
  cfg.lr = 1e-3;
  DQNLearner l(CartpoleEnv().spec(), cfg, Seed{4});
  CHECK(l.output_dim() == 2 + 4 + 1);
  const auto t = make_transition({0.05f, -0.02f, 0.01f, 0.03f}, 0, 1.0, false, {0.06f, 0.2f, 0.0f, -0.3f});
  std::vector<const Transition*> batch(8, &t);
  const auto first = l.update(batch);
  DQNLearner::UpdateStats last;
  for (int i = 0; i < 2000; ++i) last = l.update(batch);
  CHECK(last.state_loss < 1e-2 * first.state_loss);
  CHECK(last.state_loss < 1e-5);
  CHECK(last.reward_loss < 1e-5);
}

TEST_CASE("dqn with zero auxiliary weights reproduces the model-free trace") {
  auto free_cfg = small_dqn();
  auto mb_cfg = free_cfg;
  mb_cfg.model_based = true;
  mb_cfg.lambda_s = 0.0;
  mb_cfg.lambda_r = 0.0;
  const auto protocol = make_protocol(3, 5);
  TrainContext ctx;
  ctx.eval_every = 10;
  const auto a = dqn_train(cartpole_env(), protocol, free_cfg, 40, ctx);
  const auto b = dqn_train(cartpole_env(), protocol, mb_cfg, 40, ctx);
  CHECK(a.steps == b.steps);
  CHECK(a.log.records() == b.log.records());
}

TEST_CASE("dqn training is reproducible") {
  const auto protocol = make_protocol(2, 5);
  TrainContext ctx;
  ctx.master_seed = Seed{9};
  const auto a = dqn_train(cartpole_env(), protocol, small_dqn(), 30, ctx);
  const auto b = dqn_train(cartpole_env(), protocol, small_dqn(), 30, ctx);
  CHECK(a.log.records() == b.log.records());
  CHECK(a.policy.network().params() == b.policy.network().params());
  ctx.master_seed = Seed{10};
  const auto c = dqn_train(cartpole_env(), protocol, small_dqn(), 30, ctx);
  CHECK(c.policy.network().params() != a.policy.network().params());
}

TEST_CASE("dqn rejects continuous actions") {
  CHECK_THROWS_AS(DQNLearner(ReacherEnv().spec(), small_dqn(), Seed{0}), Unsupported);
}

TEST_CASE("epsilon schedule") {
  DQNConfig c;
  CHECK(epsilon_at(c, 0, 1000) == 1.0);
  CHECK(epsilon_at(c, 50, 1000) == doctest::Approx(0.525));
  CHECK(epsilon_at(c, 100, 1000) == c.eps_end);
  CHECK(epsilon_at(c, 900, 1000) == c.eps_end);
}

TEST_CASE("GAE on a hand trajectory and with lambda 0") {
  const std::vector<double> r{1.0, 1.0}, v{0.5, 0.5}, vn{0.5, 0.0};
  const std::vector<std::uint8_t> term{0, 1}, end{0, 1};
  const auto a = gae_advantages(r, v, vn, term, end, 0.99, 0.95);
  const double d0 = 1.0 + 0.99 * 0.5 - 0.5, d1 = 1.0 - 0.5;
  CHECK(std::abs(a[1] - d1) < 1e-10);
  CHECK(std::abs(a[0] - (d0 + 0.99 * 0.95 * d1)) < 1e-10);
  const auto td = gae_advantages(r, v, vn, term, end, 0.99, 0.0);
  CHECK(td[0] == doctest::Approx(d0).epsilon(1e-12));
  CHECK(td[1] == doctest::Approx(d1).epsilon(1e-12));
}

TEST_CASE("GAE stops at truncation but still bootstraps") {
  const std::vector<double> r{1.0, 1.0, 1.0}, v{0.0, 0.0, 0.0}, vn{2.0, 3.0, 4.0};
  const std::vector<std::uint8_t> term{0, 0, 0}, end{0, 1, 0};
  const auto a = gae_advantages(r, v, vn, term, end, 0.5, 1.0);
  CHECK(a[1] == doctest::Approx(1.0 + 0.5 * 3.0));
  CHECK(a[0] == doctest::Approx(1.0 + 0.5 * 2.0 + 0.5 * a[1]));
  CHECK(a[2] == doctest::Approx(1.0 + 0.5 * 4.0));
}

TEST_CASE("ppo ratio is one on the first minibatch") {
  ReacherEnv env;
  PPOLearner l(env.spec(), small_ppo(), Seed{0});
  const auto batch = collect(l, env, 128, Seed{1});
  RandomStream shuffle(Seed{0}, StreamPurpose::kMinibatch);
  CHECK(l.update(batch, shuffle).first_ratio_max_dev < 1e-5);
}

TEST_CASE("zero advantages leave the actor untouched") {
  for (int discrete = 0; discrete < 2; ++discrete) {
    EnvPtr env = discrete ? EnvPtr(std::make_unique<CartpoleEnv>()) : EnvPtr(std::make_unique<ReacherEnv>());
    PPOLearner l(env->spec(), small_ppo(), Seed{2});
    auto batch = collect(l, *env, 64, Seed{3});
    std::fill(batch.advantages.begin(), batch.advantages.end(), 0.0);
    const auto actor = l.actor().params();
    const std::vector<double> log_std(l.log_std().begin(), l.log_std().end());
    const auto critic = l.critic().params();
    RandomStream shuffle(Seed{0}, StreamPurpose::kMinibatch);
    l.update(batch, shuffle);
    CHECK(l.actor().params() == actor);
    CHECK(std::equal(log_std.begin(), log_std.end(), l.log_std().begin(), l.log_std().end()));
    CHECK(l.critic().params() != critic);
  }
}

TEST_CASE("ppo critic heads and auxiliary losses on a fixed batch") {
  ReacherEnv env;
  auto cfg = small_ppo();
  cfg.model_based = true;
  cfg.lr = 1e-3;
  PPOLearner l(env.spec(), cfg, Seed{4});
  CHECK(l.critic_outputs() == 1 + ReacherEnv::kObsDim + 1);
  const auto batch = collect(l, env, 64, Seed{5});
  const auto before = l.aux_losses(batch);
  RandomStream shuffle(Seed{0}, StreamPurpose::kMinibatch);
  for (int i = 0; i < 20; ++i) l.update(batch, shuffle);
  const auto after = l.aux_losses(batch);
  CHECK(after.first < before.first);
  CHECK(after.second < before.second);
}

TEST_CASE("ppo with zero auxiliary weights reproduces the model-free trace") {
  auto free_cfg = small_ppo();
  auto mb_cfg = free_cfg;
  mb_cfg.model_based = true;
  mb_cfg.lambda_s = 0.0;
  mb_cfg.lambda_r = 0.0;
  const auto protocol = make_protocol(2, 5);
  TrainContext ctx;
  ctx.eval_every = 1;
  const auto a = ppo_train(reacher(), protocol, free_cfg, 768, ctx);
  const auto b = ppo_train(reacher(), protocol, mb_cfg, 768, ctx);
  CHECK(a.log.records() == b.log.records());
  CHECK(a.policy.network().params() == b.policy.network().params());
}

TEST_CASE("ppo runs on discrete actions and is reproducible") {
  const auto protocol = make_protocol(2, 5);
  const auto a = ppo_train(cartpole_env(), protocol, small_ppo(), 512);
  const auto b = ppo_train(cartpole_env(), protocol, small_ppo(), 512);
  CHECK(a.steps == 512);
  CHECK(a.log.records() == b.log.records());
  CHECK(a.policy.kind() == PolicyKind::kCategorical);
}

TEST_CASE("evaluation is deterministic and random play is weak on cartpole") {
  const auto protocol = make_protocol(3, 100);
  const auto r = dqn_train(cartpole_env(), protocol, small_dqn(), 20);
  const auto x = evaluate(r.policy, cartpole_env(), protocol.test_seeds());
  CHECK(x.size() == 100);
  CHECK(evaluate(r.policy, cartpole_env(), protocol.test_seeds()) == x);
  const auto rnd = evaluate_random(cartpole_env(), protocol.test_seeds(), Seed{0});
  CHECK(std::accumulate(rnd.begin(), rnd.end(), 0.0) / rnd.size() < 40.0);
}

TEST_CASE("training log carries train and test evaluations") {
  const auto protocol = make_protocol(2, 7);
  TrainContext ctx;
  ctx.run_id = "x-r0";
  ctx.eval_every = 5;
  TrajectoryLog traj;
  ctx.trajectories = &traj;
  const auto r = dqn_train(cartpole_env(), protocol, small_dqn(), 10, ctx);
  std::size_t train = 0, test = 0, rollout = 0;
  for (const auto& rec : r.log.records()) {
    train += rec.role == role::kTrain;
    test += rec.role == role::kTest;
    rollout += rec.role == role::kRollout;
  }
  CHECK(train == 2 * 2);
  CHECK(test == 2 * 7);
  CHECK(rollout == 10);
  std::set<std::pair<std::string, std::uint64_t>> seeds;
  for (const auto& s : traj.steps()) seeds.insert({s.role, s.seed});
  CHECK(seeds.size() == 9);
}

TEST_CASE("randomized-reward training logs train_seen") {
  const auto protocol = make_protocol(1, 3);
  TrainContext ctx;
  ctx.train_wrappers.p_rand = 1.0;
  const auto r = dqn_train(cartpole_env(), protocol, small_dqn(), 4, ctx);
  CHECK(std::any_of(r.log.records().begin(), r.log.records().end(),
                    [](const MetricsRecord& m) { return m.role == role::kTrainSeen; }));
}

TEST_CASE("policy checkpoint round trip and compatibility") {
  const auto r = ppo_train(reacher(), make_protocol(1, 2), small_ppo(), 256);
  const auto path = std::filesystem::temp_directory_path() / "rlprobe-policy.bin";
  save_policy(r.policy, path);
  const auto back = load_policy(path);
  CHECK(back.kind() == PolicyKind::kGaussian);
  CHECK(back.network().params() == r.policy.network().params());
  CHECK(back.log_std() == r.policy.log_std());
  ReacherEnv env;
  const auto o = env.reset(Seed{0});
  CHECK(back.act(o) == r.policy.act(o));
  CHECK_THROWS_AS(back.check_compatible(CartpoleEnv().spec()), Unsupported);
}

TEST_CASE("cancellation stops training early") {
  std::atomic<bool> cancel{true};
  TrainContext ctx;
  ctx.cancel = &cancel;
  const auto r = dqn_train(cartpole_env(), make_protocol(1, 2), small_dqn(), 100, ctx);
  CHECK(r.cancelled);
  CHECK(r.episodes < 100);
}

}
