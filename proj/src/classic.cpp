#include "rlprobe/classic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace rlprobe {

namespace {
constexpr double kPi = std::numbers::pi;

std::size_t discrete_index(const Action& a, std::size_t count, std::string_view env) {
  if (a.index >= count)
    throw std::invalid_argument(std::string(env) + ": action index out of range");
  return a.index;
}
}  // namespace

// ---------------------------------------------------------------- rendering

void RenderConfig::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("RenderConfig: empty raster");
  if (stack_depth < 2) throw std::invalid_argument("RenderConfig: stack_depth must be >= 2");
}

void GrayFrame::fill_rect(double row0, double col0, double row1, double col1, std::uint8_t level) {
  const auto clamp_idx = [](double v, std::size_t n) {
    return static_cast<std::ptrdiff_t>(std::clamp(std::floor(v), -1.0, static_cast<double>(n)));
  };
  const auto r0 = std::max<std::ptrdiff_t>(0, clamp_idx(std::min(row0, row1), height));
  const auto r1 = std::min<std::ptrdiff_t>(height - 1, clamp_idx(std::max(row0, row1), height));
  const auto c0 = std::max<std::ptrdiff_t>(0, clamp_idx(std::min(col0, col1), width));
  const auto c1 = std::min<std::ptrdiff_t>(width - 1, clamp_idx(std::max(col0, col1), width));
  for (auto r = r0; r <= r1; ++r)
    for (auto c = c0; c <= c1; ++c) pixels[r * width + c] = level;
}

void GrayFrame::draw_segment(double row0, double col0, double row1, double col1, std::uint8_t level) {
  const double length = std::hypot(row1 - row0, col1 - col0);
  const int samples = std::max(1, static_cast<int>(std::ceil(length * 2.0)));
  for (int i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    const double r = row0 + t * (row1 - row0);
    const double c = col0 + t * (col1 - col0);
    fill_rect(r - 0.5, c - 0.5, r + 0.5, c + 0.5, level);
  }
}

void write_pgm(const std::filesystem::path& path, const GrayFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
  out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

void FrameStack::restart(const GrayFrame& first) {
  frames_.assign(depth_, first);
}

void FrameStack::push(const GrayFrame& frame) {
  frames_.pop_front();
  frames_.push_back(frame);
}

Observation FrameStack::observation() const {
  const auto& f0 = frames_.front();
  Observation obs;
  obs.layout = ObsLayout::image(depth_, f0.height, f0.width);
  obs.data.reserve(obs.layout.size());
  for (const auto& f : frames_)
    for (auto p : f.pixels) obs.data.push_back(static_cast<double>(p) / 255.0);
  return obs;
}

// ---------------------------------------------------------------- cartpole

namespace cartpole {

CartpoleState dynamics(const CartpoleState& s, std::size_t action) {
  const double force = action == 1 ? kForce : -kForce;
  const double total_mass = kCartMass + kPoleMass;
  const double polemass_length = kPoleMass * kHalfLength;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + polemass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
  return {s.x + kTau * s.x_dot, s.x_dot + kTau * x_acc, s.theta + kTau * s.theta_dot,
          s.theta_dot + kTau * theta_acc};
}

bool out_of_bounds(const CartpoleState& s) {
  return s.x < -kXLimit || s.x > kXLimit || s.theta < -kThetaLimit || s.theta > kThetaLimit;
}

}  // namespace cartpole

CartpoleEnv::CartpoleEnv() {
  spec_.obs_layout = ObsLayout::flat(4);
  spec_.action_spec = ActionSpec::discrete(2);
  spec_.max_steps = cartpole::kMaxSteps;
  spec_.discount = 0.995;
}

Observation CartpoleEnv::reset(Seed seed) {
  auto rng = rng_stream(seed, StreamPurpose::kInitState);
  state_.x = rng.uniform(-0.05, 0.05);
  state_.x_dot = rng.uniform(-0.05, 0.05);
  state_.theta = rng.uniform(-0.05, 0.05);
  state_.theta_dot = rng.uniform(-0.05, 0.05);
  clock_.restart();
  return observe();
}

StepResult CartpoleEnv::step(const Action& action) {
  clock_.begin_step(name());
  state_ = cartpole::dynamics(state_, discrete_index(action, 2, name()));
  StepResult r;
  r.reward = 1.0;
  r.terminal = cartpole::out_of_bounds(state_);
  r.truncated = clock_.tick(spec_.max_steps) && !r.terminal;
  if (r.done()) clock_.finish();
  r.observation = observe();
  return r;
}

Observation CartpoleEnv::observe() const {
  return Observation::flat({state_.x, state_.x_dot, state_.theta, state_.theta_dot});
}

std::optional<BinSpec> CartpoleEnv::bin_spec() const {
  return BinSpec{-cartpole::kThetaLimit, cartpole::kThetaLimit};
}

void CartpoleEnv::scale_initial_state(double m) {
  state_.x *= m;
  state_.x_dot *= m;
  state_.theta *= m;
  state_.theta_dot *= m;
}

void CartpoleEnv::set_state(const CartpoleState& s) {
  state_ = s;
  clock_.restart();
}

GrayFrame CartpoleEnv::render(const RenderConfig& config) const {
  config.validate();
  GrayFrame f(config.height, config.width);
  const double scale = static_cast<double>(config.width) / (2.0 * cartpole::kXLimit + 1.0);
  const double cart_row = 0.7 * static_cast<double>(config.height);
  const double cart_col = 0.5 * static_cast<double>(config.width) + state_.x * scale;
  const double half_w = 0.25 * scale;
  const double half_h = 0.15 * scale;
  f.fill_rect(cart_row - half_h, cart_col - half_w, cart_row + half_h, cart_col + half_w,
              config.foreground);
  const double pole_len = 2.0 * cartpole::kHalfLength * scale;
  const double tip_row = cart_row - half_h - pole_len * std::cos(state_.theta);
  const double tip_col = cart_col + pole_len * std::sin(state_.theta);
  f.draw_segment(cart_row - half_h, cart_col, tip_row, tip_col, config.foreground);
  return f;
}

// ---------------------------------------------------------------- acrobot

namespace acrobot {

namespace {
std::array<double, 4> derivs(const std::array<double, 4>& s, double torque) {
  constexpr double m1 = kLinkMass, m2 = kLinkMass, l1 = kLinkLength;
  constexpr double lc1 = kLinkCom, lc2 = kLinkCom, i1 = kLinkMoi, i2 = kLinkMoi, g = kGravity;
  const double theta1 = s[0], theta2 = s[1], dtheta1 = s[2], dtheta2 = s[3];
  const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * std::cos(theta2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(theta2)) + i2;
  // cos(x - pi/2) written as sin(x) so the hanging rest state is an exact equilibrium.
  const double phi2 = m2 * lc2 * g * std::sin(theta1 + theta2);
  const double phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * std::sin(theta2) -
                      2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * std::sin(theta2) +
                      (m1 * lc1 + m2 * l1) * g * std::sin(theta1) + phi2;
  const double ddtheta2 =
      (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * std::sin(theta2) - phi2) /
      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

std::array<double, 4> axpy(const std::array<double, 4>& y, double h, const std::array<double, 4>& k) {
  return {y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]};
}
}  // namespace

double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a < -kPi) a += 2 * kPi;
  return a;
}

AcrobotState dynamics(const AcrobotState& s, double torque) {
  const std::array<double, 4> y0{s.theta1, s.theta2, s.theta1_dot, s.theta2_dot};
  const auto k1 = derivs(y0, torque);
  const auto k2 = derivs(axpy(y0, kDt / 2, k1), torque);
  const auto k3 = derivs(axpy(y0, kDt / 2, k2), torque);
  const auto k4 = derivs(axpy(y0, kDt, k3), torque);
  std::array<double, 4> y;
  for (int i = 0; i < 4; ++i) y[i] = y0[i] + kDt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return {wrap_angle(y[0]), wrap_angle(y[1]), std::clamp(y[2], -kMaxVel1, kMaxVel1),
          std::clamp(y[3], -kMaxVel2, kMaxVel2)};
}

bool goal_reached(const AcrobotState& s) {
  return -std::cos(s.theta1) - std::cos(s.theta2 + s.theta1) > 1.0;
}

}  // namespace acrobot

AcrobotEnv::AcrobotEnv() {
  spec_.obs_layout = ObsLayout::flat(6);
  spec_.action_spec = ActionSpec::discrete(3);
  spec_.max_steps = acrobot::kMaxSteps;
  spec_.discount = 0.99;
}

Observation AcrobotEnv::reset(Seed seed) {
  auto rng = rng_stream(seed, StreamPurpose::kInitState);
  state_.theta1 = rng.uniform(-0.1, 0.1);
  state_.theta2 = rng.uniform(-0.1, 0.1);
  state_.theta1_dot = rng.uniform(-0.1, 0.1);
  state_.theta2_dot = rng.uniform(-0.1, 0.1);
  clock_.restart();
  return observe();
}

StepResult AcrobotEnv::step(const Action& action) {
  clock_.begin_step(name());
  const double torque = static_cast<double>(discrete_index(action, 3, name())) - 1.0;
  state_ = acrobot::dynamics(state_, torque);
  StepResult r;
  r.terminal = acrobot::goal_reached(state_);
  r.reward = r.terminal ? 0.0 : -1.0;
  r.truncated = clock_.tick(spec_.max_steps) && !r.terminal;
  if (r.done()) clock_.finish();
  r.observation = observe();
  return r;
}

Observation AcrobotEnv::observe() const {
  return Observation::flat({std::cos(state_.theta1), std::sin(state_.theta1), std::cos(state_.theta2),
                            std::sin(state_.theta2), state_.theta1_dot, state_.theta2_dot});
}

std::optional<BinSpec> AcrobotEnv::bin_spec() const { return BinSpec{-kPi, kPi}; }

void AcrobotEnv::scale_initial_state(double m) {
  state_.theta1 = acrobot::wrap_angle(state_.theta1 * m);
  state_.theta2 = acrobot::wrap_angle(state_.theta2 * m);
  state_.theta1_dot = std::clamp(state_.theta1_dot * m, -acrobot::kMaxVel1, acrobot::kMaxVel1);
  state_.theta2_dot = std::clamp(state_.theta2_dot * m, -acrobot::kMaxVel2, acrobot::kMaxVel2);
}

void AcrobotEnv::set_state(const AcrobotState& s) {
  state_ = s;
  clock_.restart();
}

GrayFrame AcrobotEnv::render(const RenderConfig& config) const {
  config.validate();
  GrayFrame f(config.height, config.width);
  const double scale = static_cast<double>(std::min(config.width, config.height)) / 4.4;
  const double r0 = 0.5 * static_cast<double>(config.height);
  const double c0 = 0.5 * static_cast<double>(config.width);
  // theta1 = 0 hangs straight down (increasing row).
  const double r1 = r0 + scale * std::cos(state_.theta1);
  const double c1 = c0 + scale * std::sin(state_.theta1);
  const double r2 = r1 + scale * std::cos(state_.theta1 + state_.theta2);
  const double c2 = c1 + scale * std::sin(state_.theta1 + state_.theta2);
  f.draw_segment(r0, c0, r1, c1, config.foreground);
  f.draw_segment(r1, c1, r2, c2, config.foreground);
  return f;
}

// ---------------------------------------------------------------- pixels

PixelEnv::PixelEnv(std::unique_ptr<RenderableEnv> inner, RenderConfig config)
    : inner_(std::move(inner)), config_(config), stack_(config.stack_depth) {
  config_.validate();
  spec_ = inner_->spec();
  spec_.obs_layout = ObsLayout::image(config_.stack_depth, config_.height, config_.width);
}

Observation PixelEnv::reset(Seed seed) {
  inner_->reset(seed);
  stack_.restart(inner_->render(config_));
  return stack_.observation();
}

StepResult PixelEnv::step(const Action& action) {
  auto r = inner_->step(action);
  stack_.push(inner_->render(config_));
  r.observation = stack_.observation();
  return r;
}

}  // namespace rlprobe
