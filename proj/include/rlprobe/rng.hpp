#pragma once

#include <cstdint>
#include <span>

namespace rlprobe {

/// Integer that fully determines an episode's stochastic draws.
struct Seed {
  std::uint64_t value = 0;
  friend constexpr bool operator==(Seed, Seed) = default;
  friend constexpr auto operator<=>(Seed, Seed) = default;
};

/// Purpose tags keep independent consumers of one seed on disjoint streams,
/// so e.g. a reward wrapper never perturbs the initial-state draw.
enum class StreamPurpose : std::uint32_t {
  kInitState = 0,
  kGoal = 1,
  kRewardRand = 2,
  kImagePick = 3,
  kObsNoise = 4,
  kLabelNoise = 5,
  // agent-side streams, keyed by the run's master seed
  kAgentInit = 16,
  kExplore = 17,
  kReplay = 18,
  kMinibatch = 19,
  kActionSample = 20,
};

/// 64-bit finalizer from splitmix64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based pseudo-random stream: draw i is mix64(key + (i+1)*phi).
/// The key is derived from (seed, purpose) only, so a stream can be rebuilt
/// at any point and yields the same sequence forever.
class RandomStream {
 public:
  RandomStream(Seed seed, StreamPurpose purpose) noexcept
      : RandomStream(seed, static_cast<std::uint32_t>(purpose)) {}
  RandomStream(Seed seed, std::uint32_t purpose_tag) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 bits of resolution.
  double next_unit() noexcept;
  /// Uniform on [a, b]; a == b returns a exactly. Rejects a > b.
  double uniform(double a, double b);
  /// Box-Muller draw; var == 0 returns mean exactly. Rejects var < 0.
  double gaussian(double mean, double var);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Free-function spelling used by the env code.
inline RandomStream rng_stream(Seed seed, StreamPurpose purpose) {
  return RandomStream(seed, purpose);
}

}  // namespace rlprobe
