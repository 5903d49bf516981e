#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rlprobe/arm.hpp"
#include "rlprobe/classic.hpp"
#include "rlprobe/selftest.hpp"
#include "rlprobe/wrappers.hpp"

using namespace rlprobe;

TEST_SUITE("wrappers") {

TEST_CASE("bin table extremes") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    for (const auto& b : build_bin_table(Seed{s}, {3, 0.0, {}}).bins) REQUIRE_FALSE(b.randomized);
    for (const auto& b : build_bin_table(Seed{s}, {3, 1.0, {}}).bins) REQUIRE(b.randomized);
  }
}

TEST_CASE("randomized-bin fraction and beta range over 1e4 seeds") {
  for (double p : {0.1, 0.5}) {
    std::size_t randomized = 0, total = 0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
      for (const auto& b : build_bin_table(Seed{s}, {3, p, {}}).bins) {
        randomized += b.randomized;
        ++total;
        REQUIRE((b.beta >= -1.0 && b.beta <= 1.0));
      }
    }
    CHECK(std::abs(static_cast<double>(randomized) / total - p) < 0.015);
  }
}

TEST_CASE("raising p_rand only reveals multipliers") {
  const auto lo = build_bin_table(Seed{3}, {5, 0.2, {}});
  const auto hi = build_bin_table(Seed{3}, {5, 0.8, {}});
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(lo.bins[i].beta == hi.bins[i].beta);
    if (lo.bins[i].randomized) CHECK(hi.bins[i].randomized);
  }
}

TEST_CASE("bin table is a pure function of seed and config") {
  CHECK(build_bin_table(Seed{8}, {3, 0.5, {}}) == build_bin_table(Seed{8}, {3, 0.5, {}}));
  RandomizedRewardEnv env(std::make_unique<CartpoleEnv>(), {3, 0.5, {}});
  env.reset(Seed{8});
  const auto table = env.table();
  while (!env.done()) env.step(Action::discrete(1));
  CHECK(env.table() == table);
  CHECK(build_bin_table(Seed{8}, {3, 0.5, {}}) == table);
}

TEST_CASE("randomize_reward branches") {
  RandomizedRewardConfig cfg{2, 1.0, BinSpec{-1.0, 1.0}};
  BinTable t;
  t.bins = {{false, -0.5}, {true, -1.0}};
  CHECK(randomize_reward(1.0, -0.5, t, cfg) == 1.0);
  CHECK(randomize_reward(1.0, 0.5, t, cfg) == -1.0);
  CHECK(bin_index(-5.0, 3, {-1.0, 1.0}) == 0);
  CHECK(bin_index(5.0, 3, {-1.0, 1.0}) == 2);
  CHECK(bin_index(1.0, 3, {-1.0, 1.0}) == 2);
  CHECK_THROWS(bin_index(NAN, 3, {-1.0, 1.0}));
}

TEST_CASE("positive multipliers keep non-negative rewards non-negative") {
  RandomStream r(Seed{1}, 4u);
  RandomizedRewardConfig cfg{4, 1.0, BinSpec{-1.0, 1.0}};
  for (int i = 0; i < 1000; ++i) {
    BinTable t;
    for (int b = 0; b < 4; ++b) t.bins.push_back({true, r.uniform(0.0, 1.0)});
    REQUIRE(randomize_reward(r.uniform(0.0, 5.0), r.uniform(-1.0, 1.0), t, cfg) >= 0.0);
  }
}

TEST_CASE("bin dimensions per env") {
  CartpoleEnv c;
  CHECK(c.bin_spec()->hi == doctest::Approx(12.0 * std::numbers::pi / 180.0));
  AcrobotEnv a;
  CHECK(a.bin_spec()->lo == -std::numbers::pi);
  ThrowerEnv t;
  t.reset(Seed{0});
  CHECK(t.binned_scalar() == t.observe().data[0]);
}

TEST_CASE("zero-variance noise is bitwise identity") {
  CartpoleEnv env;
  const auto o = env.reset(Seed{2});
  RandomStream s(Seed{2}, StreamPurpose::kObsNoise);
  CHECK(noisy_observe(o, {0.0}, s) == o);
  CHECK(s.counter() == 0);
}

TEST_CASE("noise variance matches sigma2") {
  const double var = 1e-3;
  RandomStream s(Seed{5}, StreamPurpose::kObsNoise);
  const auto clean = Observation::flat({0.5, -0.25, 1.0});
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto noisy = noisy_observe(clean, {var}, s);
    for (int j = 0; j < 3; ++j) {
      const double d = noisy.data[j] - clean.data[j];
      sum[j] += d;
      sq[j] += d * d;
    }
  }
  for (int j = 0; j < 3; ++j) {
    const double mean = sum[j] / n;
    CHECK(std::abs((sq[j] / n - mean * mean) / var - 1.0) < 0.05);
  }
}

TEST_CASE("noise leaves the underlying state untouched") {
  auto inner = std::make_unique<CartpoleEnv>();
  auto* raw = inner.get();
  ObservationNoiseEnv env(std::move(inner), {1e-3});
  CartpoleEnv clean;
  env.reset(Seed{4});
  clean.reset(Seed{4});
  for (int i = 0; i < 10; ++i) {
    env.step(Action::discrete(i % 2));
    clean.step(Action::discrete(i % 2));
    REQUIRE(raw->state() == clean.state());
  }
}

TEST_CASE("initial-state multiplier") {
  CartpoleEnv env, plain;
  CHECK(multiply_initial_state(env, {1.0}, Seed{3}) == plain.reset(Seed{3}));
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto o = multiply_initial_state(env, {5.0}, Seed{s});
    for (double v : o.data) REQUIRE(std::abs(v) <= 0.25);
  }
  PixelEnv pixels(std::make_unique<CartpoleEnv>());
  CHECK_THROWS_AS(multiply_initial_state(pixels, {5.0}, Seed{0}), Unsupported);
}

TEST_CASE("wrappers leave the initial-state draw unchanged") {
  WrapperSettings w;
  w.p_rand = 0.7;
  w.sigma2 = 0.0;
  auto env = wrap_env(std::make_unique<CartpoleEnv>(), w);
  CartpoleEnv plain;
  CHECK(env->reset(Seed{12}) == plain.reset(Seed{12}));
  w.sigma2 = 1e-3;
  auto noisy = wrap_env(std::make_unique<AcrobotEnv>(), w);
  noisy->reset(Seed{12});
  auto* noise = dynamic_cast<ObservationNoiseEnv*>(noisy.get());
  REQUIRE(noise);
  AcrobotEnv a;
  a.reset(Seed{12});
  CHECK(dynamic_cast<RandomizedRewardEnv&>(noise->inner()).inner().observe() == a.observe());
}

TEST_CASE("identity stacks are transparent") {
  const auto r = wrapper_transparency_check(100);
  INFO(r.detail);
  CHECK(r.ok);
}

TEST_CASE("wrap_env adds nothing for identity settings and reports settings as JSON") {
  auto env = wrap_env(std::make_unique<CartpoleEnv>(), {});
  CHECK(dynamic_cast<CartpoleEnv*>(env.get()) != nullptr);
  WrapperSettings w;
  w.p_rand = 0.5;
  CHECK(w.to_json() == R"({"k":3,"p_rand":0.5,"sigma2":0.0,"m":1.0})");
}

}
