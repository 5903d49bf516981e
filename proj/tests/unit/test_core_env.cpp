#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "rlprobe/classic.hpp"
#include "rlprobe/env.hpp"
#include "rlprobe/rng.hpp"

using namespace rlprobe;

TEST_SUITE("core-env") {

TEST_CASE("same seed and tag give the same stream") {
  RandomStream a(Seed{7}, StreamPurpose::kInitState), b(Seed{7}, StreamPurpose::kInitState);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("tag and seed both change the stream") {
  auto first10 = [](Seed s, StreamPurpose p) {
    RandomStream r(s, p);
    std::vector<std::uint64_t> v(10);
    for (auto& x : v) x = r.next_u64();
    return v;
  };
  CHECK(first10(Seed{7}, StreamPurpose::kInitState) != first10(Seed{7}, StreamPurpose::kRewardRand));
  CHECK(first10(Seed{7}, StreamPurpose::kInitState) != first10(Seed{8}, StreamPurpose::kInitState));
}

TEST_CASE("golden sequence is stable across builds") {
  RandomStream s(Seed{7}, StreamPurpose::kInitState);
  CHECK(s.next_u64() == 0x8da878d22fba9193ULL);
  CHECK(s.next_u64() == 0x388ac5f542b2b746ULL);
  CHECK(s.next_u64() == 0x7e26fe3d57f2fa39ULL);
}

TEST_CASE("init-state draws are unaffected by interleaved reward draws") {
  RandomStream clean(Seed{11}, StreamPurpose::kInitState);
  RandomStream mixed(Seed{11}, StreamPurpose::kInitState);
  RandomStream reward(Seed{11}, StreamPurpose::kRewardRand);
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < i % 3; ++j) reward.next_unit();
    REQUIRE(clean.next_u64() == mixed.next_u64());
  }
}

TEST_CASE("degenerate uniform and gaussian") {
  RandomStream s(Seed{1}, StreamPurpose::kInitState);
  CHECK(s.gaussian(0.0, 0.0) == 0.0);
  CHECK(s.uniform(1.0, 1.0) == 1.0);
  CHECK_THROWS(s.uniform(2.0, 1.0));
  CHECK_THROWS(s.gaussian(0.0, -1.0));
}

TEST_CASE("uniform(-1, 1) mean within the Monte Carlo bound") {
  RandomStream s(Seed{3}, StreamPurpose::kInitState);
  double sum = 0.0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) sum += s.uniform(-1.0, 1.0);
  CHECK(std::abs(sum / n) < 0.005);
}

TEST_CASE("below stays in range") {
  RandomStream s(Seed{5}, StreamPurpose::kExplore);
  for (int i = 0; i < 10000; ++i) REQUIRE(s.below(7) < 7u);
  CHECK_THROWS(s.below(0));
}

TEST_CASE("make_protocol construction") {
  const auto p1 = make_protocol(1, 100);
  CHECK(p1.train_seeds() == std::vector<Seed>{Seed{0}});
  CHECK(p1.test_seeds().size() == 100);

  const auto p5 = make_protocol(5, 2);
  CHECK(p5.train_seeds().size() == 5);
  CHECK(p5.train_seeds().back() == Seed{4});
  CHECK(p5.test_seeds() == std::vector<Seed>{Seed{1'000'000}, Seed{1'000'001}});

  CHECK(make_protocol(3).test_seeds().size() == kDefaultTestSeeds);
  CHECK_THROWS(make_protocol(0));
}

TEST_CASE("protocol disjointness over random sizes") {
  RandomStream r(Seed{9}, 1234u);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + r.below(500);
    const auto m = r.below(200);
    const auto p = make_protocol(n, m);
    std::set<Seed> train(p.train_seeds().begin(), p.train_seeds().end());
    REQUIRE(train.size() == n);
    for (auto s : p.test_seeds()) {
      REQUIRE_FALSE(train.contains(s));
      REQUIRE(is_test_seed(s));
    }
  }
  CHECK_THROWS(SeedProtocol({Seed{1}}, {Seed{1}}));
}

TEST_CASE("round-robin train schedule") {
  const auto p = make_protocol(3, 1);
  CHECK(p.train_seed_for_episode(0) == Seed{0});
  CHECK(p.train_seed_for_episode(4) == Seed{1});
}

TEST_CASE("reset and replay reproduce trajectories bit for bit") {
  CartpoleEnv a, b;
  const auto o = a.reset(Seed{3});
  CHECK(o.data == std::vector<double>{-0.042049905559027212, -0.043305866159405008, -0.0013030405103184872,
                                      -0.004671565039738557});
  CHECK(b.reset(Seed{3}) == o);
  RandomStream acts(Seed{0}, 77u);
  while (!a.done()) {
    const auto act = Action::discrete(acts.below(2));
    const auto x = a.step(act), y = b.step(act);
    REQUIRE(x.observation == y.observation);
    REQUIRE(x.reward == y.reward);
  }
}

TEST_CASE("stepping a finished episode is a contract violation") {
  CartpoleEnv env;
  env.reset(Seed{0});
  while (!env.done()) env.step(Action::discrete(0));
  CHECK_THROWS_AS(env.step(Action::discrete(0)), ContractViolation);
}

}
