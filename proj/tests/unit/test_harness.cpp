#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "rlprobe/harness.hpp"
#include "rlprobe/report.hpp"

using namespace rlprobe;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const std::string& env = "cartpole", AgentKind agent = AgentKind::kDqn) {
  std::map<std::string, std::string> flags{{"env", env},
                                           {"agent", agent_name(agent)},
                                           {"train_seeds", "2"},
                                           {"test_seeds", "5"},
                                           {"episodes", "12"},
                                           {"steps", "256"},
                                           {"eval_every", "6"},
                                           {"runs", "1"},
                                           {"hidden", "16"},
                                           {"dqn.learning_starts", "50"},
                                           {"dqn.batch_size", "8"},
                                           {"ppo.rollout_length", "128"},
                                           {"ppo.epochs", "2"}};
  return resolve_config({}, flags);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("rlprobe-harness-" + name);
  fs::remove_all(dir);
  return dir;
}

// Independent per-(run, role) mean over per-seed sums of trajectory rewards.
std::map<std::pair<std::string, std::string>, double> brute_force_means(const TrajectoryLog& log) {
  std::map<std::tuple<std::string, std::string, std::uint64_t>, double> sums;
  for (const auto& s : log.steps()) sums[{s.run_id, s.role, s.seed}] += s.reward;
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (const auto& [k, v] : sums) {
    auto& a = acc[{std::get<0>(k), std::get<1>(k)}];
    a.first += v;
    a.second += 1;
  }
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& [k, a] : acc) out[k] = a.first / a.second;
  return out;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("gap examples") {
  const std::vector<double> same{3.0, 4.0};
  CHECK(generalization_gap(same, same).gap == 0.0);
  const std::vector<double> train{10.0, 20.0}, test{5.0, 5.0, 5.0, 5.0};
  const auto g = generalization_gap(train, test);
  CHECK(g.mean_train_return == 15.0);
  CHECK(g.mean_test_return == 5.0);
  CHECK(g.gap == 10.0);
  const std::vector<double> one{7.0}, hundred(100, 2.0);
  CHECK(generalization_gap(one, hundred).gap == 5.0);
  CHECK_THROWS(generalization_gap({}, test));
}

TEST_CASE("mean and standard error") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto m = mean_stderr(xs);
  CHECK(m.mean == 2.5);
  CHECK(m.stderr == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  const std::vector<double> single{1.0};
  CHECK(mean_stderr(single).stderr == 0.0);
}

TEST_CASE("run ids and cells") {
  auto c = tiny();
  CHECK(run_id_for(c, 2) == "cartpole-dqn-N2-r2");
  c.wrappers.p_rand = 0.5;
  CHECK(run_id_for(c, 0) == "cartpole-dqn-N2-p0.5-r0");
  CHECK(cell_of("cartpole-dqn-N2-p0.5-r0") == "cartpole-dqn-N2-p0.5");
}

TEST_CASE("seed sweep plan expands cells times runs") {
  auto c = tiny();
  c.runs = 5;
  CHECK(seed_sweep_jobs(c).size() == 25);
  c.sweep.train_seed_counts = {3};
  c.runs = 1;
  const auto jobs = seed_sweep_jobs(c);
  REQUIRE(jobs.size() == 1);
  CHECK(jobs[0].config.train_seeds == 3);
  c.sweep.train_seed_counts = {1, 2};
  c.runs = 2;
  const auto rr = random_reward_sweep_jobs(c);
  CHECK(rr.size() == 2 * 4 * 2);
  CHECK(rr[2].config.wrappers.p_rand == 0.2);
  CHECK(rr[2].config.seed == c.seed);
  CHECK(rr[3].config.seed == c.seed + 1);
}

TEST_CASE("one-cell sweep logs exactly one run with a re-runnable snapshot") {
  auto c = tiny();
  c.sweep.train_seed_counts = {2};
  const auto out = run_seed_sweep(c);
  std::set<std::string> runs;
  for (const auto& r : out.log.records()) runs.insert(r.run_id);
  CHECK(runs == std::set<std::string>{"cartpole-dqn-N2-r0"});
  const auto& snap = out.log.records().front().wrapper_json;
  CHECK(snap.find("\"env\":\"cartpole\"") != std::string::npos);
  CHECK(snap.find("\"train_seeds\":2") != std::string::npos);
  CHECK(snap.find("\"p_rand\":0.0") != std::string::npos);
}

TEST_CASE("gap from the log equals the brute force over trajectories") {
  auto c = tiny();
  c.runs = 2;
  const auto out = run_cell(c);
  const auto brute = brute_force_means(out.trajectories);
  const auto runs = summarize_runs(out.log);
  REQUIRE(runs.size() == 2);
  for (const auto& r : runs) {
    const double gap = brute.at({r.run_id, "train"}) - brute.at({r.run_id, "test"});
    CHECK(std::abs(gap - r.gap.gap) < 1e-9);
    CHECK(r.gap.train_returns == returns_from_trajectories(out.trajectories, r.run_id, "train"));
  }
}

TEST_CASE("parallel and serial sweeps agree") {
  auto c = tiny();
  c.runs = 3;
  c.jobs = 1;
  const auto serial = run_cell(c);
  c.jobs = 3;
  const auto parallel = run_cell(c);
  CHECK(serial.log.records() == parallel.log.records());
  CHECK(summary_table(summarize_cells(serial.log)) == summary_table(summarize_cells(parallel.log)));
}

TEST_CASE("aggregation does not depend on record order") {
  auto c = tiny();
  c.runs = 3;
  const auto out = run_cell(c);
  MetricsLog reversed;
  for (auto it = out.log.records().rbegin(); it != out.log.records().rend(); ++it) reversed.append(*it);
  CHECK(summary_table(summarize_cells(reversed)) == summary_table(summarize_cells(out.log)));
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  try {
    parallel_for(10, 4, [](std::size_t i) {
      if (i == 3 || i == 7) throw std::runtime_error("job " + std::to_string(i));
    });
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "job 3");
  }
}

TEST_CASE("robustness row identity column equals plain evaluation") {
  auto c = tiny();
  const auto out = run_cell(c);
  const auto factory = env_factory("cartpole");
  const auto protocol = make_protocol(2, 5);
  const auto plain = evaluate(out.policies[0], factory, protocol.test_seeds());
  const double mean = std::accumulate(plain.begin(), plain.end(), 0.0) / plain.size();
  const std::vector<double> sig{0.0, 1e-3}, mult{1.0, 5.0};
  MetricsLog log;
  const auto row = robustness_row(out.policies[0], factory, protocol.test_seeds(), RobustAxis::kSigma2, sig, &log);
  CHECK(row[0] == mean);
  CHECK(robustness_row(out.policies[0], factory, protocol.test_seeds(), RobustAxis::kInitMult, mult)[0] == mean);
  CHECK(log.size() == 10);
}

TEST_CASE("default sweep grids") {
  SweepPlan p;
  CHECK(p.train_seed_counts == std::vector<std::size_t>{1, 2, 5, 10, 100});
  CHECK(p.p_rand == std::vector<double>{0.1, 0.2, 0.5, 1.0});
  CHECK(p.sigma2 == std::vector<double>{0.0, 1e-4, 5e-4, 1e-3, 2e-3});
  CHECK(p.init_mult == std::vector<double>{1.0, 5.0, 10.0, 20.0, 100.0});
  CHECK(resolve_config({}, {{"env", "cartpole"}, {"agent", "dqn"}}).runs == 5);
  CHECK(tiny().wrappers.k_bins == 3);
}

TEST_CASE("metrics CSV round trip") {
  MetricsLog log;
  log.append({"a-r0", 10, 2, 1000003, "test", 12.5, R"({"k":3,"p_rand":0.1})"});
  log.append({"a-r0", 10, 2, 0, "train", -0.1, "{}"});
  std::stringstream s;
  write_metrics(log, s);
  CHECK(read_metrics(s).records() == log.records());

  std::stringstream empty;
  write_metrics(MetricsLog{}, empty);
  CHECK(empty.str() == std::string(kMetricsHeader) + "\n");
  CHECK(read_metrics(empty).empty());
  CHECK_THROWS(log.append({"b", 0, 0, 0, "test", NAN, "{}"}));
  CHECK_THROWS(log.append({"b,c", 0, 0, 0, "test", 1.0, "{}"}));
}

TEST_CASE("trajectory CSV round trip") {
  const auto dir = scratch("traj");
  fs::create_directories(dir);
  TrajectoryLog t;
  t.append({"r", "test", 5, 0, 1.0});
  t.append({"r", "test", 5, 1, 0.25});
  write_trajectories(t, dir / "t.csv");
  const auto back = read_trajectories(dir / "t.csv");
  REQUIRE(back.steps().size() == 2);
  CHECK(back.steps()[1].reward == 0.25);
}

TEST_CASE("report on a two-cell sweep writes two charts and a summary") {
  auto c = tiny();
  c.sweep.train_seed_counts = {1, 2};
  const auto out = run_seed_sweep(c);
  const auto dir = scratch("report");
  const auto files = emit_report(out.log, dir);
  CHECK(files.charts.size() == 2);
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(dir)) svgs += e.path().extension() == ".svg";
  CHECK(svgs == 2);
  CHECK(fs::exists(files.summary));
  std::ifstream f(files.charts[0]);
  std::string head;
  std::getline(f, head);
  CHECK(head.find("<?xml") == 0);
}

TEST_CASE("svg chart is well formed") {
  const auto svg = svg_chart("t", "steps", {{"return", {{"train", "#1f77b4", {{0, 1}, {1, 2}}}}}});
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}

}
