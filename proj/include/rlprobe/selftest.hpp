#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rlprobe {

struct CheckResult {
  std::string name;
  bool ok = false;
  double worst = 0.0;  // largest error seen (relative for gradient checks)
  std::string detail;
};

/// Central-difference checks in double precision of every backward pass and
/// loss gradient, `instances` random instances each. Passes when the
/// relative error ||a - n|| / (||a|| + ||n||) stays below `tolerance`.
std::vector<CheckResult> gradient_checks(std::size_t instances = 100, std::uint64_t seed = 0,
                                         double tolerance = 1e-5);

/// Identity wrapper stacks (p_rand = 0, sigma2 = 0, m = 1, each applied
/// explicitly) against the bare env over random action sequences.
CheckResult wrapper_transparency_check(std::size_t sequences = 100);

/// Trains a tiny DQN and compares the gap from the metrics log with a sum
/// over the raw trajectory rows.
CheckResult gap_oracle_check();

/// GAE against direct discounted summation on a hand trajectory.
CheckResult gae_oracle_check();

std::vector<CheckResult> run_selftest();

}  // namespace rlprobe
