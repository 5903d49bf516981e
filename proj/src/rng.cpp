#include "rlprobe/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rlprobe {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

RandomStream::RandomStream(Seed seed, std::uint32_t purpose_tag) noexcept
    : key_(mix64(seed.value ^ mix64(0xD1B54A32D192ED03ULL + purpose_tag * kGolden))) {}

std::uint64_t RandomStream::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RandomStream::next_unit() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double a, double b) {
  if (!(a <= b)) throw std::invalid_argument("uniform: requires a <= b");
  const double u = next_unit();
  if (a == b) return a;
  return a + (b - a) * u;
}

double RandomStream::gaussian(double mean, double var) {
  if (!(var >= 0.0)) throw std::invalid_argument("gaussian: variance must be non-negative");
  const double u1 = 1.0 - next_unit();  // (0, 1]
  const double u2 = next_unit();
  if (var == 0.0) return mean;
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + std::sqrt(var) * z;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below: n must be positive");
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace rlprobe
