#include <doctest.h>

#include <algorithm>
#include <complex>
#include <numbers>

#include "rlprobe/arm.hpp"

using namespace rlprobe;

namespace {
Action random_action(RandomStream& r, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = r.uniform(-1.0, 1.0);
  return Action::continuous(v);
}
}  // namespace

TEST_SUITE("envs-arm") {

TEST_CASE("fingertip kinematics against complex arithmetic") {
  RandomStream r(Seed{0}, 5u);
  for (int i = 0; i < 1000; ++i) {
    ArmState s;
    s.theta1 = r.uniform(-std::numbers::pi, std::numbers::pi);
    s.theta2 = r.uniform(-std::numbers::pi, std::numbers::pi);
    const auto z = arm::kLink1 * std::polar(1.0, s.theta1) + arm::kLink2 * std::polar(1.0, s.theta1 + s.theta2);
    const auto tip = arm::fingertip(s);
    REQUIRE(std::abs(tip.x - z.real()) < 1e-12);
    REQUIRE(std::abs(tip.y - z.imag()) < 1e-12);
  }
}

TEST_CASE("reacher observation and reward") {
  ReacherEnv env;
  const auto o = env.reset(Seed{3});
  CHECK(o.data.size() == ReacherEnv::kObsDim);
  const auto goal = env.goal();
  ReacherEnv again;
  again.reset(Seed{3});
  CHECK(again.goal() == goal);
  CHECK(norm(goal) <= ReacherEnv::kGoalRadius);

  RandomStream r(Seed{1}, 2u);
  while (!env.done()) REQUIRE(env.step(random_action(r, 2)).reward <= 0.0);
}

TEST_CASE("reacher at the goal with zero action has zero reward") {
  ReacherEnv env;
  env.reset(Seed{0});
  const ArmState s{0.3, 0.4, 0.0, 0.0};
  env.set_state(s, arm::fingertip(s));
  CHECK(env.step(Action::continuous({0.0, 0.0})).reward == 0.0);
}

TEST_CASE("reacher clamps out-of-range actions") {
  ReacherEnv a, b;
  a.reset(Seed{2});
  b.reset(Seed{2});
  CHECK(a.step(Action::continuous({5.0, -7.0})).observation == b.step(Action::continuous({1.0, -1.0})).observation);
}

TEST_CASE("goal placement ignores the agent's actions") {
  ReacherEnv env;
  env.reset(Seed{9});
  const auto goal = env.goal();
  RandomStream r(Seed{4}, 1u);
  for (int i = 0; i < 10; ++i) env.step(random_action(r, 2));
  env.reset(Seed{9});
  CHECK(env.goal() == goal);

  ThrowerEnv t;
  t.reset(Seed{9});
  const auto g = t.active_goal();
  for (int i = 0; i < 10; ++i) t.step(random_action(r, 3));
  t.reset(Seed{9});
  CHECK(t.active_goal() == g);
}

TEST_CASE("thrower observation sizes") {
  ThrowerEnv single(false), multi(true);
  CHECK(single.reset(Seed{0}).data.size() == ThrowerEnv::kObsDim);
  CHECK(multi.reset(Seed{0}).data.size() == ThrowerEnv::kMultiObsDim);
}

TEST_CASE("held ball tracks the fingertip") {
  ThrowerEnv env;
  env.reset(Seed{1});
  RandomStream r(Seed{2}, 3u);
  std::size_t steps = 0;
  while (!env.done()) {
    auto a = random_action(r, 3);
    a.values[2] = -1.0;
    env.step(a);
    ++steps;
    REQUIRE(env.ball().held);
    REQUIRE(env.ball().position == env.fingertip_world());
  }
  CHECK(steps == ThrowerEnv::kMaxSteps);
}

TEST_CASE("ballistic flight keeps horizontal velocity") {
  ThrowerEnv env;
  env.reset(Seed{4});
  for (int i = 0; i < 5; ++i) env.step(Action::continuous({1.0, 1.0, -1.0}));
  env.step(Action::continuous({1.0, 1.0, 1.0}));
  REQUIRE_FALSE(env.ball().held);
  const double vx = env.ball().velocity.x;
  while (!env.done() && !env.ball().landed) {
    REQUIRE(env.ball().velocity.x == vx);
    env.step(Action::continuous({0.0, 0.0, 0.0}));
  }
}

TEST_CASE("ball resting in the goal box costs at most 0.05 sqrt 2 per step") {
  ThrowerEnv env;
  env.reset(Seed{0});
  // drop the ball from the base straight above the goal by moving the goal under it
  for (int i = 0; i < 3; ++i) env.step(Action::continuous({0.0, 0.0, 1.0}));
  while (!env.ball().landed && !env.done()) env.step(Action::continuous({0.0, 0.0, 0.0}));
  REQUIRE(env.ball().landed);
  MultiGoalSpec g = env.goals();
  g.goals[g.active_id] = {env.ball().position.x, ThrowerEnv::kBoxHalfWidth};
  env.set_goals(g);
  while (!env.done()) {
    const auto r = env.step(Action::continuous({0.0, 0.0, 0.0}));
    REQUIRE(-r.reward <= 0.05 * std::sqrt(2.0) + 1e-15);
  }
}

TEST_CASE("multi-goal reward reads the active goal only") {
  ThrowerEnv a(true), b(true);
  a.reset(Seed{6});
  b.reset(Seed{6});
  auto g = b.goals();
  std::vector<std::size_t> inactive;
  for (std::size_t i = 0; i < MultiGoalSpec::kGoals; ++i)
    if (i != g.active_id) inactive.push_back(i);
  std::swap(g.goals[inactive[0]], g.goals[inactive[3]]);
  std::swap(g.goals[inactive[1]], g.goals[inactive[2]]);
  b.set_goals(g);
  RandomStream r(Seed{8}, 1u);
  while (!a.done()) {
    const auto act = random_action(r, 3);
    REQUIRE(a.step(act).reward == b.step(act).reward);
  }
}

TEST_CASE("active goal id is uniform over seeds") {
  std::array<int, MultiGoalSpec::kGoals> counts{};
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const auto g = draw_multi_goals(Seed{static_cast<std::uint64_t>(s)});
    REQUIRE(g.active_id < MultiGoalSpec::kGoals);
    ++counts[g.active_id];
  }
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.2) < 0.02);
  CHECK(draw_multi_goals(Seed{3}).active_id == draw_multi_goals(Seed{3}).active_id);
}

TEST_CASE("initial-state scaling multiplies angles and velocities") {
  ReacherEnv env;
  env.reset(Seed{1});
  const auto s0 = env.arm();
  env.reset(Seed{1});
  env.scale_initial_state(5.0);
  CHECK(env.arm().theta1 == doctest::Approx(5.0 * s0.theta1));
  CHECK(env.arm().theta2_dot == doctest::Approx(5.0 * s0.theta2_dot));
}

}
