#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rlprobe/config.hpp"

namespace rlprobe {

// ---------------------------------------------------------------- statistics

/// Generalization gap of one policy: mean train-seed return minus mean
/// test-seed return, each return an undiscounted episode sum.
struct GapReport {
  double mean_train_return = 0.0;
  double mean_test_return = 0.0;
  double gap = 0.0;
  std::vector<double> train_returns;
  std::vector<double> test_returns;
  std::size_t runs = 1;
  double stderr_across_runs = 0.0;
};

GapReport generalization_gap(std::span<const double> train_returns, std::span<const double> test_returns);

struct MeanStderr {
  double mean = 0.0;
  double stderr = 0.0;  // sample standard deviation / sqrt(n); 0 when n < 2
  std::size_t n = 0;
};

MeanStderr mean_stderr(std::span<const double> xs);
inline double pooled_stderr(const MeanStderr& a, const MeanStderr& b) {
  return std::sqrt(a.stderr * a.stderr + b.stderr * b.stderr);
}

// ---------------------------------------------------------------- log summaries

/// "<cell>-r<k>" -> "<cell>".
std::string cell_of(const std::string& run_id);

/// Last evaluation of a run.
struct RunSummary {
  std::string run_id;
  std::string cell_id;
  std::uint64_t step = 0;
  std::uint64_t episode = 0;
  GapReport gap;
  std::vector<double> train_seen;  // empty unless the reward was randomized
};

/// One entry per run that has both train and test records, sorted by run id.
std::vector<RunSummary> summarize_runs(const MetricsLog& log);

struct CellSummary {
  std::string cell_id;
  std::size_t runs = 0;
  MeanStderr train;  // over per-run mean returns
  MeanStderr test;
  MeanStderr gap;
  MeanStderr train_seen;  // n == 0 when absent
};

std::vector<CellSummary> summarize_cells(const MetricsLog& log);
/// Fixed-width text table of summarize_cells.
std::string summary_table(const std::vector<CellSummary>& cells);

struct CurvePoint {
  double step = 0.0;  // mean over runs of the learner's step count
  MeanStderr train;
  MeanStderr test;
  MeanStderr gap;
};

/// Evaluations of a cell aligned by their order within each run.
std::vector<CurvePoint> cell_curve(const MetricsLog& log, const std::string& cell_id);

/// Per-seed sums of the rewards in a trajectory log for one run and role.
std::vector<double> returns_from_trajectories(const TrajectoryLog& log, const std::string& run_id,
                                              const std::string& role);

// ---------------------------------------------------------------- jobs

struct Job {
  std::string run_id;
  RunConfig config;  // train_seeds, wrappers and seed already specialised
};

struct JobOutput {
  MetricsLog log;
  TrajectoryLog trajectories;
  Policy policy;
  bool cancelled = false;
};

struct SweepOutput {
  MetricsLog log;
  TrajectoryLog trajectories;
  std::vector<Job> jobs;
  std::vector<Policy> policies;  // parallel to jobs
  bool incomplete = false;
};

std::string run_id_for(const RunConfig& cell, std::size_t run);
/// JSON snapshot of everything that defines the cell; embedded in every record.
std::string cell_snapshot(const RunConfig& cell);

std::vector<Job> cell_jobs(const RunConfig& config);
std::vector<Job> seed_sweep_jobs(const RunConfig& config);
std::vector<Job> random_reward_sweep_jobs(const RunConfig& config);

JobOutput run_job(const Job& job, const EnvFactory& factory, const std::atomic<bool>* cancel = nullptr);

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown (lowest index first) after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Runs jobs on a pool; results are merged in job order, so the output does
/// not depend on the thread count.
SweepOutput run_jobs(const std::vector<Job>& jobs, const EnvFactory& factory, std::size_t threads,
                     const std::atomic<bool>* cancel = nullptr);

SweepOutput run_cell(const RunConfig& config, const std::atomic<bool>* cancel = nullptr);
SweepOutput run_seed_sweep(const RunConfig& config, const std::atomic<bool>* cancel = nullptr);
SweepOutput run_random_reward_sweep(const RunConfig& config, const std::atomic<bool>* cancel = nullptr);

// ---------------------------------------------------------------- robustness

enum class RobustAxis { kSigma2, kInitMult };
std::string axis_name(RobustAxis axis);

/// Mean test return at each perturbation level. Per-seed returns are
/// appended to `log` (role robust) when given.
std::vector<double> robustness_row(const Policy& policy, const EnvFactory& factory, std::span<const Seed> test_seeds,
                                   RobustAxis axis, std::span<const double> levels, MetricsLog* log = nullptr,
                                   const std::string& run_id = "", const std::string& snapshot = "");

struct RobustnessTable {
  RobustAxis axis = RobustAxis::kSigma2;
  std::vector<double> levels;
  std::vector<std::size_t> seed_counts;             // rows
  std::vector<std::vector<MeanStderr>> cells;       // [row][level], over runs
  std::string to_text() const;
};

/// Trains every (train-seed count, run) of the seed sweep, then evaluates
/// each policy along `axis` on the test seeds.
RobustnessTable run_robustness_sweep(const RunConfig& config, RobustAxis axis,
                                     const std::atomic<bool>* cancel = nullptr, SweepOutput* output = nullptr);

}  // namespace rlprobe
