#include "rlprobe/harness.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace rlprobe {

// ---------------------------------------------------------------- statistics

GapReport generalization_gap(std::span<const double> train_returns, std::span<const double> test_returns) {
  if (train_returns.empty() || test_returns.empty())
    throw std::invalid_argument("generalization_gap: both return lists must be non-empty");
  GapReport r;
  r.train_returns.assign(train_returns.begin(), train_returns.end());
  r.test_returns.assign(test_returns.begin(), test_returns.end());
  r.mean_train_return = std::accumulate(train_returns.begin(), train_returns.end(), 0.0) /
                        static_cast<double>(train_returns.size());
  r.mean_test_return =
      std::accumulate(test_returns.begin(), test_returns.end(), 0.0) / static_cast<double>(test_returns.size());
  r.gap = r.mean_train_return - r.mean_test_return;
  return r;
}

MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr m;
  m.n = xs.size();
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.stderr = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  return m;
}

// ---------------------------------------------------------------- log summaries

std::string cell_of(const std::string& run_id) {
  const auto pos = run_id.rfind("-r");
  if (pos == std::string::npos || pos + 2 >= run_id.size()) return run_id;
  const auto tail = run_id.substr(pos + 2);
  if (!std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; })) return run_id;
  return run_id.substr(0, pos);
}

namespace {

bool is_eval_role(const std::string& role) {
  return role == role::kTrain || role == role::kTest || role == role::kTrainSeen;
}

struct EvalPoint {
  std::uint64_t step = 0;
  std::uint64_t episode = 0;
  std::vector<double> train, test, seen;
};

/// run id -> evaluation points ordered by (step, episode); returns within a
/// point are ordered by seed, so the result does not depend on record order.
std::map<std::string, std::vector<EvalPoint>> eval_points(const MetricsLog& log) {
  using Key = std::pair<std::uint64_t, std::uint64_t>;
  using Returns = std::map<std::uint64_t, double>;
  std::map<std::string, std::map<Key, std::array<Returns, 3>>> grouped;
  for (const auto& r : log.records()) {
    if (!is_eval_role(r.role)) continue;
    const std::size_t slot = r.role == role::kTrain ? 0 : r.role == role::kTest ? 1 : 2;
    grouped[r.run_id][{r.step, r.episode}][slot][r.seed] = r.ret;
  }
  std::map<std::string, std::vector<EvalPoint>> runs;
  for (const auto& [run_id, points] : grouped) {
    auto& pts = runs[run_id];
    for (const auto& [key, slots] : points) {
      EvalPoint p{key.first, key.second, {}, {}, {}};
      for (const auto& [seed, ret] : slots[0]) p.train.push_back(ret);
      for (const auto& [seed, ret] : slots[1]) p.test.push_back(ret);
      for (const auto& [seed, ret] : slots[2]) p.seen.push_back(ret);
      pts.push_back(std::move(p));
    }
  }
  return runs;
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::vector<RunSummary> summarize_runs(const MetricsLog& log) {
  std::vector<RunSummary> out;
  for (const auto& [run_id, pts] : eval_points(log)) {
    const auto it = std::find_if(pts.rbegin(), pts.rend(), [](const EvalPoint& p) {
      return !p.train.empty() && !p.test.empty();
    });
    if (it == pts.rend()) continue;
    RunSummary s;
    s.run_id = run_id;
    s.cell_id = cell_of(run_id);
    s.step = it->step;
    s.episode = it->episode;
    s.gap = generalization_gap(it->train, it->test);
    s.train_seen = it->seen;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CellSummary> summarize_cells(const MetricsLog& log) {
  std::map<std::string, std::vector<RunSummary>> by_cell;
  for (auto& r : summarize_runs(log)) by_cell[r.cell_id].push_back(std::move(r));
  std::vector<CellSummary> out;
  for (const auto& [cell, runs] : by_cell) {
    std::vector<double> tr, te, gap, seen;
    for (const auto& r : runs) {
      tr.push_back(r.gap.mean_train_return);
      te.push_back(r.gap.mean_test_return);
      gap.push_back(r.gap.gap);
      if (!r.train_seen.empty()) seen.push_back(mean_of(r.train_seen));
    }
    out.push_back({cell, runs.size(), mean_stderr(tr), mean_stderr(te), mean_stderr(gap), mean_stderr(seen)});
  }
  return out;
}

namespace {

std::string pm(const MeanStderr& m) {
  if (m.n == 0) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << m.mean << " +- " << m.stderr;
  return s.str();
}

}  // namespace

std::string summary_table(const std::vector<CellSummary>& cells) {
  std::size_t w = 4;
  for (const auto& c : cells) w = std::max(w, c.cell_id.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(w)) << "cell" << "  " << std::right << std::setw(4) << "runs"
      << std::setw(20) << "train" << std::setw(20) << "test" << std::setw(20) << "gap" << std::setw(20)
      << "train_seen" << '\n';
  for (const auto& c : cells)
    out << std::left << std::setw(static_cast<int>(w)) << c.cell_id << "  " << std::right << std::setw(4) << c.runs
        << std::setw(20) << pm(c.train) << std::setw(20) << pm(c.test) << std::setw(20) << pm(c.gap)
        << std::setw(20) << pm(c.train_seen) << '\n';
  return out.str();
}

std::vector<CurvePoint> cell_curve(const MetricsLog& log, const std::string& cell_id) {
  std::vector<std::vector<EvalPoint>> runs;
  for (auto& [run_id, pts] : eval_points(log)) {
    if (cell_of(run_id) != cell_id) continue;
    std::vector<EvalPoint> complete;
    for (auto& p : pts)
      if (!p.train.empty() && !p.test.empty()) complete.push_back(std::move(p));
    runs.push_back(std::move(complete));
  }
  if (runs.empty()) return {};
  std::size_t len = runs.front().size();
  for (const auto& r : runs) len = std::min(len, r.size());
  std::vector<CurvePoint> curve;
  for (std::size_t k = 0; k < len; ++k) {
    std::vector<double> tr, te, gap;
    double step = 0.0;
    for (const auto& r : runs) {
      const double a = mean_of(r[k].train), b = mean_of(r[k].test);
      tr.push_back(a);
      te.push_back(b);
      gap.push_back(a - b);
      step += static_cast<double>(r[k].step);
    }
    curve.push_back({step / static_cast<double>(runs.size()), mean_stderr(tr), mean_stderr(te), mean_stderr(gap)});
  }
  return curve;
}

std::vector<double> returns_from_trajectories(const TrajectoryLog& log, const std::string& run_id,
                                              const std::string& role) {
  std::map<std::uint64_t, double> sums;
  for (const auto& s : log.steps())
    if (s.run_id == run_id && s.role == role) sums[s.seed] += s.reward;
  std::vector<double> out;
  for (const auto& [seed, total] : sums) out.push_back(total);
  return out;
}

// ---------------------------------------------------------------- jobs

std::string run_id_for(const RunConfig& cell, std::size_t run) {
  std::string id = cell.env + "-" + agent_name(cell.agent) + "-N" + std::to_string(cell.train_seeds);
  if (cell.wrappers.p_rand > 0.0) id += "-p" + format_double(cell.wrappers.p_rand);
  return id + "-r" + std::to_string(run);
}

std::string cell_snapshot(const RunConfig& cell) {
  nlohmann::ordered_json j;
  j["env"] = cell.env;
  j["agent"] = agent_name(cell.agent);
  j["train_seeds"] = cell.train_seeds;
  j["test_seeds"] = cell.test_seeds;
  if (is_dqn(cell.agent))
    j["episodes"] = cell.episodes;
  else
    j["steps"] = cell.steps;
  j["seed"] = cell.seed;
  j["hidden"] = cell.hidden;
  const auto w = nlohmann::ordered_json::parse(cell.wrappers.to_json());
  for (auto it = w.begin(); it != w.end(); ++it) j[it.key()] = it.value();
  return j.dump();
}

namespace {

std::vector<Job> expand_runs(const RunConfig& cell) {
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < cell.runs; ++r) {
    Job job{run_id_for(cell, r), cell};
    job.config.seed = cell.seed + r;
    jobs.push_back(std::move(job));
  }
  return jobs;
}

}  // namespace

std::vector<Job> cell_jobs(const RunConfig& config) { return expand_runs(config); }

std::vector<Job> seed_sweep_jobs(const RunConfig& config) {
  std::vector<Job> jobs;
  for (auto n : config.sweep.train_seed_counts) {
    RunConfig cell = config;
    cell.train_seeds = n;
    for (auto& j : expand_runs(cell)) jobs.push_back(std::move(j));
  }
  return jobs;
}

std::vector<Job> random_reward_sweep_jobs(const RunConfig& config) {
  std::vector<Job> jobs;
  for (auto n : config.sweep.train_seed_counts)
    for (double p : config.sweep.p_rand) {
      RunConfig cell = config;
      cell.train_seeds = n;
      cell.wrappers.p_rand = p;
      for (auto& j : expand_runs(cell)) jobs.push_back(std::move(j));
    }
  return jobs;
}

JobOutput run_job(const Job& job, const EnvFactory& factory, const std::atomic<bool>* cancel) {
  const auto& c = job.config;
  c.check_compatible();
  const auto protocol = make_protocol(c.train_seeds, c.test_seeds);
  JobOutput out;
  TrainContext ctx;
  ctx.run_id = job.run_id;
  ctx.master_seed = Seed{c.seed};
  ctx.train_wrappers.k_bins = c.wrappers.k_bins;
  ctx.train_wrappers.p_rand = c.wrappers.p_rand;
  ctx.eval_every = c.eval_every;
  ctx.snapshot_json = cell_snapshot(c);
  ctx.trajectories = &out.trajectories;
  ctx.cancel = cancel;

  auto result = is_dqn(c.agent) ? dqn_train(factory, protocol, c.dqn, c.episodes, ctx)
                                : ppo_train(factory, protocol, c.ppo, c.steps, ctx);
  out.log = std::move(result.log);
  out.policy = std::move(result.policy);
  out.cancelled = result.cancelled;

  if (!out.cancelled) {
    if (c.wrappers.sigma2 != 0.0) {
      const double level = c.wrappers.sigma2;
      robustness_row(out.policy, factory, protocol.test_seeds(), RobustAxis::kSigma2, std::span(&level, 1), &out.log,
                     job.run_id, ctx.snapshot_json);
    }
    if (c.wrappers.init_mult != 1.0) {
      const double level = c.wrappers.init_mult;
      robustness_row(out.policy, factory, protocol.test_seeds(), RobustAxis::kInitMult, std::span(&level, 1),
                     &out.log, job.run_id, ctx.snapshot_json);
    }
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto t = std::max<std::size_t>(1, std::min(threads, n));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SweepOutput run_jobs(const std::vector<Job>& jobs, const EnvFactory& factory, std::size_t threads,
                     const std::atomic<bool>* cancel) {
  std::vector<JobOutput> outputs(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) { outputs[i] = run_job(jobs[i], factory, cancel); });
  SweepOutput out;
  out.jobs = jobs;
  for (auto& o : outputs) {
    out.log.extend(o.log);
    out.trajectories.extend(o.trajectories);
    out.policies.push_back(std::move(o.policy));
    out.incomplete = out.incomplete || o.cancelled;
  }
  if (cancel && cancel->load()) out.incomplete = true;
  return out;
}

namespace {

SweepOutput run_all(const RunConfig& config, const std::vector<Job>& jobs, const std::atomic<bool>* cancel,
                    bool needs_bins = false) {
  config.check_compatible();
  const auto factory = env_factory(config.env, config.data);
  if (needs_bins && !factory()->bin_spec())
    throw Unsupported("env '" + config.env + "' has no binned state scalar");
  return run_jobs(jobs, factory, config.jobs, cancel);
}

}  // namespace

SweepOutput run_cell(const RunConfig& config, const std::atomic<bool>* cancel) {
  return run_all(config, cell_jobs(config), cancel);
}

SweepOutput run_seed_sweep(const RunConfig& config, const std::atomic<bool>* cancel) {
  return run_all(config, seed_sweep_jobs(config), cancel);
}

SweepOutput run_random_reward_sweep(const RunConfig& config, const std::atomic<bool>* cancel) {
  return run_all(config, random_reward_sweep_jobs(config), cancel, true);
}

// ---------------------------------------------------------------- robustness

std::string axis_name(RobustAxis axis) { return axis == RobustAxis::kSigma2 ? "sigma2" : "init_mult"; }

std::vector<double> robustness_row(const Policy& policy, const EnvFactory& factory, std::span<const Seed> test_seeds,
                                   RobustAxis axis, std::span<const double> levels, MetricsLog* log,
                                   const std::string& run_id, const std::string& snapshot) {
  std::vector<double> row;
  for (double level : levels) {
    WrapperSettings w;
    if (axis == RobustAxis::kSigma2)
      w.sigma2 = level;
    else
      w.init_mult = level;
    const auto returns = evaluate(policy, factory, test_seeds, EvalRequest{w, nullptr, run_id, role::kRobust});
    row.push_back(mean_of(returns));
    if (log) {
      auto j = snapshot.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(snapshot);
      j[axis == RobustAxis::kSigma2 ? "sigma2" : "m"] = level;
      const auto json = j.dump();
      for (std::size_t i = 0; i < test_seeds.size(); ++i)
        log->append({run_id, 0, 0, test_seeds[i].value, role::kRobust, returns[i], json});
    }
  }
  return row;
}

std::string RobustnessTable::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(8) << ("N \\ " + std::string(axis == RobustAxis::kSigma2 ? "s2" : "m"));
  for (double l : levels) out << std::right << std::setw(20) << format_double(l);
  out << '\n';
  for (std::size_t r = 0; r < seed_counts.size(); ++r) {
    out << std::left << std::setw(8) << seed_counts[r];
    for (const auto& c : cells[r]) out << std::right << std::setw(20) << pm(c);
    out << '\n';
  }
  return out.str();
}

RobustnessTable run_robustness_sweep(const RunConfig& config, RobustAxis axis, const std::atomic<bool>* cancel,
                                     SweepOutput* output) {
  config.check_compatible();
  if (axis == RobustAxis::kInitMult && is_image_env(config.env))
    throw IncompatibleConfig("initial-state multiplier is undefined for image env '" + config.env + "'");
  const auto factory = env_factory(config.env, config.data);
  auto jobs = seed_sweep_jobs(config);
  for (auto& j : jobs) j.config.wrappers.sigma2 = 0.0, j.config.wrappers.init_mult = 1.0;
  auto sweep = run_jobs(jobs, factory, config.jobs, cancel);

  const auto& levels = axis == RobustAxis::kSigma2 ? config.sweep.sigma2 : config.sweep.init_mult;
  std::vector<std::vector<double>> rows(jobs.size());
  std::vector<MetricsLog> logs(jobs.size());
  if (!sweep.incomplete) {
    parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
      const auto protocol = make_protocol(jobs[i].config.train_seeds, jobs[i].config.test_seeds);
      rows[i] = robustness_row(sweep.policies[i], factory, protocol.test_seeds(), axis, levels, &logs[i],
                               jobs[i].run_id, cell_snapshot(jobs[i].config));
    });
    for (const auto& l : logs) sweep.log.extend(l);
  }

  RobustnessTable table;
  table.axis = axis;
  table.levels = levels;
  table.seed_counts = config.sweep.train_seed_counts;
  for (auto n : table.seed_counts) {
    std::vector<MeanStderr> row;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      std::vector<double> xs;
      for (std::size_t i = 0; i < jobs.size(); ++i)
        if (jobs[i].config.train_seeds == n && !rows[i].empty()) xs.push_back(rows[i][l]);
      row.push_back(mean_stderr(xs));
    }
    table.cells.push_back(std::move(row));
  }
  if (output) *output = std::move(sweep);
  return table;
}

}  // namespace rlprobe
