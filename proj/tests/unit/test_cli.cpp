#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlprobe/config.hpp"

using namespace rlprobe;
namespace fs = std::filesystem;

namespace {

const std::string kCli = RLPROBE_CLI;

int run(const std::string& args, std::string* output = nullptr) {
  const auto log = fs::temp_directory_path() / "rlprobe-cli-out.txt";
  const int status = std::system((kCli + " " + args + " > " + log.string() + " 2>&1").c_str());
  if (output) {
    std::ifstream f(log);
    std::stringstream ss;
    ss << f.rdbuf();
    *output = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rlprobe-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("toml subset parsing") {
  const auto t = parse_toml("# c\nenv = \"cartpole\"\n[wrappers]\np_rand = 0.5 # tail\n[sweep]\ntrain_seeds = [1, 2]\n");
  CHECK(t.at("env").s == "cartpole");
  CHECK(t.at("wrappers.p_rand").f == 0.5);
  CHECK(t.at("wrappers.p_rand").line == 4);
  CHECK(t.at("sweep.train_seeds").items.size() == 2);
  CHECK_THROWS_AS(parse_toml("env = \n"), ConfigError);
}

TEST_CASE("defaults depend on env and agent") {
  const auto ppo = resolve_config({}, {{"env", "cartpole"}, {"agent", "ppo"}});
  CHECK(ppo.ppo.lr == 3e-4);
  CHECK(ppo.ppo.rollout_length == 2048);
  CHECK(ppo.ppo.epochs == 10);
  CHECK(ppo.ppo.clip == 0.2);
  CHECK(ppo.ppo.gae_lambda == 0.95);
  CHECK(ppo.hidden == 512);
  CHECK(ppo.wrappers.k_bins == 3);
  CHECK(ppo.wrappers.p_rand == 0.0);
  const auto dqn = resolve_config({}, {{"env", "cartpole"}, {"agent", "dqn"}});
  CHECK(dqn.dqn.lr == 3e-3);
  CHECK(dqn.dqn.gamma == 0.995);
  CHECK(dqn.dqn.replay_capacity == 1'000'000);
  const auto pix = resolve_config({}, {{"env", "cartpole-pixel"}, {"agent", "dqn"}});
  CHECK(pix.dqn.lr == 3e-4);
  CHECK(pix.dqn.replay_capacity == 100'000);
}

TEST_CASE("unknown keys are rejected by name and line") {
  const auto t = parse_toml("env = \"cartpole\"\nagent = \"ppo\"\nleraning_rate = 0.1\n");
  try {
    resolve_config(t, {});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("leraning_rate") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(resolve_config({}, {{"env", "cartpole"}, {"agent", "ppo"}, {"bogus", "1"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({}, {{"env", "nowhere"}, {"agent", "ppo"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({}, {{"env", "cartpole"}, {"agent", "ppo"}, {"wrappers.p_rand", "1.5"}}),
                  ConfigError);
}

TEST_CASE("flags override the file") {
  const auto t = parse_toml("env = \"cartpole\"\nagent = \"dqn\"\ngamma = 0.99\n");
  CHECK(resolve_config(t, {}).dqn.gamma == 0.99);
  CHECK(resolve_config(t, {{"gamma", "0.9"}}).dqn.gamma == 0.9);
}

TEST_CASE("expanded config round trips") {
  auto c = resolve_config({}, {{"env", "reacher"}, {"agent", "ppo-mb"}, {"wrappers.sigma2", "0.001"},
                               {"sweep.train_seeds", "3,4"}, {"seed", "17"}});
  const auto text = to_toml(c);
  const auto back = resolve_config(parse_toml(text), {});
  CHECK(to_toml(back) == text);
  CHECK(back.seed == 17);
  CHECK(back.ppo.model_based);
  CHECK(back.sweep.train_seed_counts == std::vector<std::size_t>{3, 4});
}

TEST_CASE("compatibility") {
  CHECK_NOTHROW(resolve_config({}, {{"env", "cartpole"}, {"agent", "ppo"}}).check_compatible());
  CHECK_NOTHROW(resolve_config({}, {{"env", "mnist-explore"}, {"agent", "dqn"}}).check_compatible());
  CHECK_THROWS_AS(resolve_config({}, {{"env", "reacher"}, {"agent", "dqn"}}).check_compatible(), IncompatibleConfig);
  CHECK_THROWS_AS(
      resolve_config({}, {{"env", "mnist-explore"}, {"agent", "dqn"}, {"wrappers.init_mult", "5"}}).check_compatible(),
      IncompatibleConfig);
}

TEST_CASE("cli exit codes") {
  std::string out;
  CHECK(run("train --env reacher --agent dqn --out " + scratch("x").string(), &out) == 3);
  CHECK(out.find("error: code=3") != std::string::npos);
  const auto dir = scratch("bad");
  std::ofstream(dir / "c.toml") << "env = \"cartpole\"\nagent = \"dqn\"\nleraning_rate = 1\n";
  CHECK(run("train --config " + (dir / "c.toml").string(), &out) == 2);
  CHECK(out.find("leraning_rate") != std::string::npos);
  CHECK(run("train --env cartpole", &out) == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("fetch-data --data-dir " + scratch("empty").string() + " --dataset mnist") == 4);
}

TEST_CASE("cli train writes outputs and re-running the config reproduces them") {
  const auto a = scratch("a"), b = scratch("b");
  const std::string common =
      " --env cartpole --agent dqn --train-seeds 2 --test-seeds 3 --episodes 10 --eval-every 5 --hidden 8"
      " --set dqn.learning_starts=20 --set dqn.batch_size=4";
  REQUIRE(run("train" + common + " --out " + a.string()) == 0);
  for (const char* f : {"config.toml", "metrics.csv", "trajectories.csv"}) CHECK(fs::exists(a / f));
  CHECK_FALSE(fs::exists(a / "INCOMPLETE"));
  REQUIRE(run("train --config " + (a / "config.toml").string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "trajectories.csv") == slurp(b / "trajectories.csv"));
}

}
