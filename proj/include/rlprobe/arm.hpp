#pragma once

#include <array>
#include <cmath>

#include "rlprobe/env.hpp"

namespace rlprobe {

/// Planar two-link arm. Simplified stand-in for the MuJoCo arms: torques
/// act directly as joint accelerations with linear damping.
struct ArmState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta1_dot = 0.0;
  double theta2_dot = 0.0;
  friend bool operator==(const ArmState&, const ArmState&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }

namespace arm {
inline constexpr double kLink1 = 0.1;
inline constexpr double kLink2 = 0.1;
inline constexpr double kMaxVel = 8.0;
inline constexpr double kDt = 0.02;
inline constexpr double kTorqueGain = 20.0;
inline constexpr double kDamping = 1.0;

/// Fingertip relative to the arm base.
Vec2 fingertip(const ArmState& s);
Vec2 fingertip_velocity(const ArmState& s);
/// One explicit Euler step of theta'' = 20 a - theta', velocities clamped.
ArmState step(const ArmState& s, double torque1, double torque2);
/// Angles uniform(-pi, pi) * 0.1, velocities uniform(-0.005, 0.005).
ArmState random_initial(RandomStream& rng);
ArmState scaled(const ArmState& s, double m);
}  // namespace arm

// ---------------------------------------------------------------- reacher

class ReacherEnv final : public Env {
 public:
  static constexpr std::size_t kObsDim = 11;
  static constexpr std::size_t kMaxSteps = 50;
  static constexpr double kGoalRadius = 0.19;

  ReacherEnv();

  std::string name() const override { return "reacher"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;
  Observation observe() const override;
  std::optional<BinSpec> bin_spec() const override;
  double binned_scalar() const override;
  void scale_initial_state(double m) override;
  std::size_t steps_taken() const override { return clock_.steps(); }
  bool done() const override { return clock_.done(); }

  const ArmState& arm() const noexcept { return arm_; }
  Vec2 goal() const noexcept { return goal_; }
  /// Places the env in an arbitrary live state (tests, oracles).
  void set_state(const ArmState& arm, Vec2 goal);

 private:
  EnvSpec spec_;
  ArmState arm_;
  Vec2 goal_;
  EpisodeClock clock_;
};

// ---------------------------------------------------------------- thrower

struct Ball {
  Vec2 position;
  Vec2 velocity;
  bool held = true;
  bool landed = false;
};

struct MultiGoalSpec {
  static constexpr std::size_t kGoals = 5;
  std::array<Vec2, kGoals> goals{};
  std::size_t active_id = 0;
};

/// Throw a ball into a goal box on the ground. The arm base sits at
/// (0, kBaseHeight); the ground is y = 0. With `multi`, five boxes are
/// placed and only the active one rewards.
class ThrowerEnv final : public Env {
 public:
  static constexpr std::size_t kObsDim = 23;
  static constexpr std::size_t kMultiObsDim = 28;
  static constexpr std::size_t kMaxSteps = 100;
  static constexpr double kBaseHeight = 0.25;
  static constexpr double kGravity = 1.0;
  static constexpr double kBoxHalfWidth = 0.05;
  static constexpr double kGoalMinX = 0.3;
  static constexpr double kGoalMaxX = 1.2;
  static constexpr double kMinGoalSeparation = 0.15;

  explicit ThrowerEnv(bool multi = false);

  std::string name() const override { return multi_ ? "thrower-multi" : "thrower"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;
  Observation observe() const override;
  std::optional<BinSpec> bin_spec() const override { return BinSpec{-1.0, 1.0}; }
  double binned_scalar() const override;
  void scale_initial_state(double m) override;
  std::size_t steps_taken() const override { return clock_.steps(); }
  bool done() const override { return clock_.done(); }

  const ArmState& arm() const noexcept { return arm_; }
  const Ball& ball() const noexcept { return ball_; }
  const MultiGoalSpec& goals() const noexcept { return goals_; }
  Vec2 active_goal() const noexcept { return goals_.goals[goals_.active_id]; }
  Vec2 fingertip_world() const;
  /// Replaces the goal layout of a live episode (tests).
  void set_goals(const MultiGoalSpec& goals);

 private:
  void attach_ball();

  bool multi_;
  EnvSpec spec_;
  ArmState arm_;
  Ball ball_;
  MultiGoalSpec goals_;
  EpisodeClock clock_;
};

/// Draws the multi-goal layout for a seed from its GOAL stream.
MultiGoalSpec draw_multi_goals(Seed seed);

}  // namespace rlprobe
