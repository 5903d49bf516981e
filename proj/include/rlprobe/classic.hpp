#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <vector>

#include "rlprobe/env.hpp"

namespace rlprobe {

// ---------------------------------------------------------------- rendering

struct RenderConfig {
  std::size_t width = 64;
  std::size_t height = 64;
  std::uint8_t foreground = 255;  // grayscale level of drawn shapes; background is 0
  std::size_t stack_depth = 2;
  void validate() const;
};

/// Single-channel 8-bit raster, row-major.
struct GrayFrame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  GrayFrame() = default;
  GrayFrame(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0) {}
  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  void fill_rect(double row0, double col0, double row1, double col1, std::uint8_t level);
  /// Segment with a fixed 1-pixel radius brush, no anti-aliasing.
  void draw_segment(double row0, double col0, double row1, double col1, std::uint8_t level);
  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;
};

/// Writes a binary PGM (P5) for debugging.
void write_pgm(const std::filesystem::path& path, const GrayFrame& frame);

/// Keeps the last `depth` frames; the first frame of an episode is repeated.
class FrameStack {
 public:
  explicit FrameStack(std::size_t depth) : depth_(depth) {}
  void restart(const GrayFrame& first);
  void push(const GrayFrame& frame);
  /// Channels ordered oldest to newest, pixels scaled to [0, 1].
  Observation observation() const;

 private:
  std::size_t depth_;
  std::deque<GrayFrame> frames_;
};

/// Classic-control env whose state can also be rasterized.
class RenderableEnv : public Env {
 public:
  virtual GrayFrame render(const RenderConfig& config) const = 0;
};

// ---------------------------------------------------------------- cartpole

struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  friend bool operator==(const CartpoleState&, const CartpoleState&) = default;
};

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kForce = 10.0;
inline constexpr double kTau = 0.02;
inline constexpr double kXLimit = 2.4;
inline constexpr double kThetaLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
inline constexpr std::size_t kMaxSteps = 200;

/// One Euler step; action 0 pushes left, 1 pushes right.
CartpoleState dynamics(const CartpoleState& s, std::size_t action);
bool out_of_bounds(const CartpoleState& s);
}  // namespace cartpole

class CartpoleEnv final : public RenderableEnv {
 public:
  CartpoleEnv();

  std::string name() const override { return "cartpole"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;
  Observation observe() const override;
  std::optional<BinSpec> bin_spec() const override;
  double binned_scalar() const override { return state_.theta; }
  void scale_initial_state(double m) override;
  std::size_t steps_taken() const override { return clock_.steps(); }
  bool done() const override { return clock_.done(); }
  GrayFrame render(const RenderConfig& config) const override;

  const CartpoleState& state() const noexcept { return state_; }
  /// Places the env in an arbitrary live state (tests, oracles).
  void set_state(const CartpoleState& s);

 private:
  EnvSpec spec_;
  CartpoleState state_;
  EpisodeClock clock_;
};

// ---------------------------------------------------------------- acrobot

struct AcrobotState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta1_dot = 0.0;
  double theta2_dot = 0.0;
  friend bool operator==(const AcrobotState&, const AcrobotState&) = default;
};

namespace acrobot {
inline constexpr double kDt = 0.2;
inline constexpr double kLinkLength = 1.0;
inline constexpr double kLinkMass = 1.0;
inline constexpr double kLinkCom = 0.5;
inline constexpr double kLinkMoi = 1.0;
inline constexpr double kGravity = 9.8;
inline constexpr double kMaxVel1 = 4.0 * 3.14159265358979323846;
inline constexpr double kMaxVel2 = 9.0 * 3.14159265358979323846;
inline constexpr std::size_t kMaxSteps = 200;

/// RK4 step of the two-link dynamics under torque in {-1, 0, +1}
/// (action index 0, 1, 2), followed by angle wrapping and velocity clamping.
AcrobotState dynamics(const AcrobotState& s, double torque);
bool goal_reached(const AcrobotState& s);
double wrap_angle(double a);
}  // namespace acrobot

class AcrobotEnv final : public RenderableEnv {
 public:
  AcrobotEnv();

  std::string name() const override { return "acrobot"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;
  Observation observe() const override;
  std::optional<BinSpec> bin_spec() const override;
  double binned_scalar() const override { return state_.theta1; }
  void scale_initial_state(double m) override;
  std::size_t steps_taken() const override { return clock_.steps(); }
  bool done() const override { return clock_.done(); }
  GrayFrame render(const RenderConfig& config) const override;

  const AcrobotState& state() const noexcept { return state_; }
  void set_state(const AcrobotState& s);

 private:
  EnvSpec spec_;
  AcrobotState state_;
  EpisodeClock clock_;
};

// ---------------------------------------------------------------- pixels

/// Pixel variant of a renderable env: observations are stacked frames.
class PixelEnv final : public Env {
 public:
  PixelEnv(std::unique_ptr<RenderableEnv> inner, RenderConfig config = {});

  std::string name() const override { return inner_->name() + "-pixel"; }
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(Seed seed) override;
  StepResult step(const Action& action) override;
  Observation observe() const override { return stack_.observation(); }
  std::optional<BinSpec> bin_spec() const override { return inner_->bin_spec(); }
  double binned_scalar() const override { return inner_->binned_scalar(); }
  std::size_t steps_taken() const override { return inner_->steps_taken(); }
  bool done() const override { return inner_->done(); }

  const RenderableEnv& inner() const noexcept { return *inner_; }

 private:
  std::unique_ptr<RenderableEnv> inner_;
  RenderConfig config_;
  EnvSpec spec_;
  FrameStack stack_;
};

}  // namespace rlprobe
