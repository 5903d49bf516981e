#include "rlprobe/arm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rlprobe {

namespace {
constexpr double kPi = std::numbers::pi;

std::array<double, 3> clamped_action(const Action& a, std::size_t dim, std::string_view env) {
  if (a.values.size() != dim)
    throw std::invalid_argument(std::string(env) + ": wrong action dimension");
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < dim; ++i) {
    if (!std::isfinite(a.values[i])) throw std::invalid_argument(std::string(env) + ": non-finite action");
    out[i] = std::clamp(a.values[i], -1.0, 1.0);
  }
  return out;
}

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }
}  // namespace

namespace arm {

Vec2 fingertip(const ArmState& s) {
  return {kLink1 * std::cos(s.theta1) + kLink2 * std::cos(s.theta1 + s.theta2),
          kLink1 * std::sin(s.theta1) + kLink2 * std::sin(s.theta1 + s.theta2)};
}

Vec2 fingertip_velocity(const ArmState& s) {
  const double w12 = s.theta1_dot + s.theta2_dot;
  return {-kLink1 * std::sin(s.theta1) * s.theta1_dot - kLink2 * std::sin(s.theta1 + s.theta2) * w12,
          kLink1 * std::cos(s.theta1) * s.theta1_dot + kLink2 * std::cos(s.theta1 + s.theta2) * w12};
}

ArmState step(const ArmState& s, double torque1, double torque2) {
  const double acc1 = kTorqueGain * torque1 - kDamping * s.theta1_dot;
  const double acc2 = kTorqueGain * torque2 - kDamping * s.theta2_dot;
  return {s.theta1 + kDt * s.theta1_dot, s.theta2 + kDt * s.theta2_dot,
          std::clamp(s.theta1_dot + kDt * acc1, -kMaxVel, kMaxVel),
          std::clamp(s.theta2_dot + kDt * acc2, -kMaxVel, kMaxVel)};
}

ArmState random_initial(RandomStream& rng) {
  ArmState s;
  s.theta1 = 0.1 * rng.uniform(-kPi, kPi);
  s.theta2 = 0.1 * rng.uniform(-kPi, kPi);
  s.theta1_dot = rng.uniform(-0.005, 0.005);
  s.theta2_dot = rng.uniform(-0.005, 0.005);
  return s;
}

ArmState scaled(const ArmState& s, double m) {
  return {s.theta1 * m, s.theta2 * m, std::clamp(s.theta1_dot * m, -kMaxVel, kMaxVel),
          std::clamp(s.theta2_dot * m, -kMaxVel, kMaxVel)};
}

}  // namespace arm

// ---------------------------------------------------------------- reacher

ReacherEnv::ReacherEnv() {
  spec_.obs_layout = ObsLayout::flat(kObsDim);
  spec_.action_spec = ActionSpec::continuous({-1.0, -1.0}, {1.0, 1.0});
  spec_.max_steps = kMaxSteps;
  spec_.discount = 0.99;
}

Observation ReacherEnv::reset(Seed seed) {
  auto init = rng_stream(seed, StreamPurpose::kInitState);
  arm_ = arm::random_initial(init);
  auto goal_rng = rng_stream(seed, StreamPurpose::kGoal);
  const double r = kGoalRadius * std::sqrt(goal_rng.next_unit());
  const double phi = goal_rng.uniform(-kPi, kPi);
  goal_ = {r * std::cos(phi), r * std::sin(phi)};
  clock_.restart();
  return observe();
}

StepResult ReacherEnv::step(const Action& action) {
  clock_.begin_step(name());
  const auto a = clamped_action(action, 2, name());
  arm_ = arm::step(arm_, a[0], a[1]);
  StepResult r;
  r.reward = -norm(arm::fingertip(arm_) - goal_) - 0.1 * (a[0] * a[0] + a[1] * a[1]);
  r.truncated = clock_.tick(spec_.max_steps);
  if (r.done()) clock_.finish();
  r.observation = observe();
  return r;
}

Observation ReacherEnv::observe() const {
  const Vec2 tip = arm::fingertip(arm_);
  return Observation::flat({std::cos(arm_.theta1), std::cos(arm_.theta2), std::sin(arm_.theta1),
                            std::sin(arm_.theta2), goal_.x, goal_.y, arm_.theta1_dot,
                            arm_.theta2_dot, tip.x - goal_.x, tip.y - goal_.y, 0.0});
}

std::optional<BinSpec> ReacherEnv::bin_spec() const { return BinSpec{-kPi, kPi}; }

double ReacherEnv::binned_scalar() const { return wrap(arm_.theta1); }

void ReacherEnv::scale_initial_state(double m) { arm_ = arm::scaled(arm_, m); }

void ReacherEnv::set_state(const ArmState& arm, Vec2 goal) {
  arm_ = arm;
  goal_ = goal;
  clock_.restart();
}

// ---------------------------------------------------------------- thrower

MultiGoalSpec draw_multi_goals(Seed seed) {
  auto rng = rng_stream(seed, StreamPurpose::kGoal);
  MultiGoalSpec spec;
  spec.active_id = static_cast<std::size_t>(rng.below(MultiGoalSpec::kGoals));
  // Uniform over separated placements: sorted draws on the shrunk interval,
  // spread by the separation, then shuffled so slot order carries no position.
  constexpr std::size_t n = MultiGoalSpec::kGoals;
  const double slack = ThrowerEnv::kGoalMaxX - ThrowerEnv::kGoalMinX - (n - 1) * ThrowerEnv::kMinGoalSeparation;
  std::array<double, n> xs{};
  for (auto& x : xs) x = rng.uniform(0.0, slack);
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 0; i < n; ++i) xs[i] += ThrowerEnv::kGoalMinX + i * ThrowerEnv::kMinGoalSeparation;
  rng.shuffle(std::span<double>(xs));
  for (std::size_t i = 0; i < n; ++i) spec.goals[i] = {xs[i], ThrowerEnv::kBoxHalfWidth};
  return spec;
}

ThrowerEnv::ThrowerEnv(bool multi) : multi_(multi) {
  spec_.obs_layout = ObsLayout::flat(multi ? kMultiObsDim : kObsDim);
  spec_.action_spec = ActionSpec::continuous({-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0});
  spec_.max_steps = kMaxSteps;
  spec_.discount = 0.99;
}

Vec2 ThrowerEnv::fingertip_world() const {
  const Vec2 tip = arm::fingertip(arm_);
  return {tip.x, tip.y + kBaseHeight};
}

void ThrowerEnv::attach_ball() {
  ball_.position = fingertip_world();
  ball_.velocity = arm::fingertip_velocity(arm_);
}

Observation ThrowerEnv::reset(Seed seed) {
  auto init = rng_stream(seed, StreamPurpose::kInitState);
  arm_ = arm::random_initial(init);
  if (multi_) {
    goals_ = draw_multi_goals(seed);
  } else {
    auto goal_rng = rng_stream(seed, StreamPurpose::kGoal);
    goals_ = MultiGoalSpec{};
    goals_.goals[0] = {goal_rng.uniform(kGoalMinX, kGoalMaxX), kBoxHalfWidth};
    goals_.active_id = 0;
  }
  ball_ = Ball{};
  attach_ball();
  clock_.restart();
  return observe();
}

StepResult ThrowerEnv::step(const Action& action) {
  clock_.begin_step(name());
  const auto a = clamped_action(action, 3, name());
  arm_ = arm::step(arm_, a[0], a[1]);
  if (ball_.held) {
    attach_ball();
    if (a[2] > 0.0) ball_.held = false;
  } else if (!ball_.landed) {
    ball_.position.x += arm::kDt * ball_.velocity.x;
    ball_.position.y += arm::kDt * ball_.velocity.y;
    ball_.velocity.y -= arm::kDt * kGravity;
    if (ball_.position.y <= 0.0) {
      ball_.position.y = 0.0;
      ball_.velocity = {};
      ball_.landed = true;
    }
  }
  StepResult r;
  r.reward = -norm(ball_.position - active_goal()) - 0.05 * (a[0] * a[0] + a[1] * a[1]);
  r.truncated = clock_.tick(spec_.max_steps);
  if (r.done()) clock_.finish();
  r.observation = observe();
  return r;
}

Observation ThrowerEnv::observe() const {
  const Vec2 tip = fingertip_world();
  std::vector<double> v{std::cos(arm_.theta1), std::cos(arm_.theta2), std::sin(arm_.theta1),
                        std::sin(arm_.theta2), arm_.theta1_dot, arm_.theta2_dot, tip.x, tip.y,
                        ball_.position.x, ball_.position.y, ball_.velocity.x, ball_.velocity.y,
                        ball_.held ? 1.0 : 0.0};
  if (multi_) {
    for (std::size_t i = 0; i < MultiGoalSpec::kGoals; ++i) v.push_back(i == goals_.active_id ? 1.0 : 0.0);
    for (const auto& g : goals_.goals) {
      v.push_back(g.x);
      v.push_back(g.y);
    }
  } else {
    const Vec2 g = active_goal();
    v.insert(v.end(), {g.x, g.y, ball_.position.x - g.x, ball_.position.y - g.y});
    v.resize(kObsDim, 0.0);
  }
  return Observation::flat(std::move(v));
}

double ThrowerEnv::binned_scalar() const { return std::cos(arm_.theta1); }

void ThrowerEnv::scale_initial_state(double m) {
  arm_ = arm::scaled(arm_, m);
  if (ball_.held) attach_ball();
}

void ThrowerEnv::set_goals(const MultiGoalSpec& goals) {
  if (goals.active_id >= MultiGoalSpec::kGoals) throw std::invalid_argument("set_goals: bad active id");
  goals_ = goals;
}

}  // namespace rlprobe
