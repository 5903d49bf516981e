#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rlprobe/rng.hpp"

namespace rlprobe {

/// Raised when a caller breaks an operation's precondition (e.g. stepping a
/// finished episode).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when an operation is not defined for the given env or wrapper.
class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kTestSeedOffset = 1'000'000;
inline constexpr std::size_t kDefaultTestSeeds = 100;

/// Disjoint train/test seed sets.
class SeedProtocol {
 public:
  SeedProtocol(std::vector<Seed> train, std::vector<Seed> test);

  const std::vector<Seed>& train_seeds() const noexcept { return train_; }
  const std::vector<Seed>& test_seeds() const noexcept { return test_; }
  /// Round-robin schedule over the train set.
  Seed train_seed_for_episode(std::size_t episode) const noexcept {
    return train_[episode % train_.size()];
  }

 private:
  std::vector<Seed> train_;
  std::vector<Seed> test_;
};

/// train = [0, n_train), test = [1e6, 1e6 + m_test).
SeedProtocol make_protocol(std::size_t n_train, std::size_t m_test = kDefaultTestSeeds);

inline bool is_test_seed(Seed s) noexcept { return s.value >= kTestSeedOffset; }

struct ActionSpec {
  enum class Kind { kDiscrete, kContinuous };
  Kind kind = Kind::kDiscrete;
  std::size_t count = 0;  // discrete action count
  std::vector<double> low;
  std::vector<double> high;

  static ActionSpec discrete(std::size_t count);
  static ActionSpec continuous(std::vector<double> low, std::vector<double> high);

  bool is_discrete() const noexcept { return kind == Kind::kDiscrete; }
  std::size_t dim() const noexcept { return is_discrete() ? 1 : low.size(); }
};

struct ObsLayout {
  enum class Kind { kFlat, kImage };
  Kind kind = Kind::kFlat;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 0;

  static ObsLayout flat(std::size_t dim) { return {Kind::kFlat, 1, 1, dim}; }
  static ObsLayout image(std::size_t c, std::size_t h, std::size_t w) {
    return {Kind::kImage, c, h, w};
  }
  std::size_t size() const noexcept { return channels * height * width; }
  bool is_image() const noexcept { return kind == Kind::kImage; }
  friend bool operator==(const ObsLayout&, const ObsLayout&) = default;
};

struct Observation {
  std::vector<double> data;
  ObsLayout layout;

  static Observation flat(std::vector<double> values) {
    const auto n = values.size();
    return {std::move(values), ObsLayout::flat(n)};
  }
  /// Checks the length and finiteness invariants.
  void validate() const;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct Action {
  std::size_t index = 0;
  std::vector<double> values;

  static Action discrete(std::size_t i) { return {i, {}}; }
  static Action continuous(std::vector<double> v) { return {0, std::move(v)}; }
  friend bool operator==(const Action&, const Action&) = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;   // true end of the MDP episode: no bootstrap
  bool truncated = false;  // step cap reached
  bool done() const noexcept { return terminal || truncated; }
};

struct EnvSpec {
  ObsLayout obs_layout;
  ActionSpec action_spec;
  std::size_t max_steps = 1;
  double discount = 0.99;
  void validate() const;
};

/// The scalar that the randomized-reward wrapper bins, and its range.
struct BinSpec {
  double lo = 0.0;
  double hi = 1.0;
};

/// Gym-style environment. Single owner, not thread-safe; separate instances
/// may run on separate threads.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string name() const = 0;
  virtual const EnvSpec& spec() const = 0;
  virtual Observation reset(Seed seed) = 0;
  virtual StepResult step(const Action& action) = 0;
  /// Re-emits the current observation without advancing.
  virtual Observation observe() const = 0;

  virtual std::optional<BinSpec> bin_spec() const { return std::nullopt; }
  /// Current value of the binned scalar; throws Unsupported if none.
  virtual double binned_scalar() const;
  /// Scales the freshly drawn initial state componentwise. Throws
  /// Unsupported for envs where this is undefined.
  virtual void scale_initial_state(double m);

  virtual std::size_t steps_taken() const = 0;
  virtual bool done() const = 0;
};

/// Shared step-cap and done bookkeeping.
class EpisodeClock {
 public:
  void restart() noexcept { steps_ = 0; done_ = false; started_ = true; }
  /// Call at the start of step(); throws on a finished or unstarted episode.
  void begin_step(std::string_view env_name) const;
  /// Advances and returns true if the cap has been reached.
  bool tick(std::size_t max_steps) noexcept { ++steps_; return steps_ >= max_steps; }
  void finish() noexcept { done_ = true; }
  std::size_t steps() const noexcept { return steps_; }
  bool done() const noexcept { return done_; }

 private:
  std::size_t steps_ = 0;
  bool done_ = false;
  bool started_ = false;
};

using EnvPtr = std::unique_ptr<Env>;

}  // namespace rlprobe
