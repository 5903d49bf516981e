#include "rlprobe/env.hpp"

#include <cmath>
#include <set>

namespace rlprobe {

SeedProtocol::SeedProtocol(std::vector<Seed> train, std::vector<Seed> test)
    : train_(std::move(train)), test_(std::move(test)) {
  if (train_.empty()) throw std::invalid_argument("SeedProtocol: at least one train seed required");
  std::set<Seed> seen_train(train_.begin(), train_.end());
  std::set<Seed> seen_test(test_.begin(), test_.end());
  if (seen_train.size() != train_.size() || seen_test.size() != test_.size())
    throw std::invalid_argument("SeedProtocol: duplicate seeds");
  for (const auto s : test_)
    if (seen_train.contains(s)) throw std::invalid_argument("SeedProtocol: train and test seeds overlap");
}

SeedProtocol make_protocol(std::size_t n_train, std::size_t m_test) {
  if (n_train < 1) throw std::invalid_argument("make_protocol: n_train must be >= 1");
  if (n_train >= kTestSeedOffset)
    throw std::invalid_argument("make_protocol: n_train must be < 1000000");
  std::vector<Seed> train(n_train), test(m_test);
  for (std::size_t i = 0; i < n_train; ++i) train[i] = Seed{i};
  for (std::size_t i = 0; i < m_test; ++i) test[i] = Seed{kTestSeedOffset + i};
  return SeedProtocol(std::move(train), std::move(test));
}

ActionSpec ActionSpec::discrete(std::size_t count) {
  if (count == 0) throw std::invalid_argument("ActionSpec: discrete count must be positive");
  return {Kind::kDiscrete, count, {}, {}};
}

ActionSpec ActionSpec::continuous(std::vector<double> low, std::vector<double> high) {
  if (low.empty() || low.size() != high.size())
    throw std::invalid_argument("ActionSpec: bounds must be non-empty and equal length");
  for (std::size_t i = 0; i < low.size(); ++i)
    if (!(low[i] < high[i])) throw std::invalid_argument("ActionSpec: low < high required");
  return {Kind::kContinuous, 0, std::move(low), std::move(high)};
}

void Observation::validate() const {
  if (data.size() != layout.size())
    throw ContractViolation("Observation: data length does not match layout");
  for (double v : data)
    if (!std::isfinite(v)) throw ContractViolation("Observation: non-finite entry");
}

void EnvSpec::validate() const {
  if (max_steps == 0) throw std::invalid_argument("EnvSpec: max_steps must be positive");
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("EnvSpec: discount must lie in [0, 1)");
}

double Env::binned_scalar() const {
  throw Unsupported(name() + ": no registered bin dimension");
}

void Env::scale_initial_state(double) {
  throw Unsupported(name() + ": initial-state multiplier is undefined for this env");
}

void EpisodeClock::begin_step(std::string_view env_name) const {
  if (!started_) throw ContractViolation(std::string(env_name) + ": step() before reset()");
  if (done_) throw ContractViolation(std::string(env_name) + ": step() on a finished episode");
}

}  // namespace rlprobe
