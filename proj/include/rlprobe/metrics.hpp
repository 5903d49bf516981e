#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rlprobe {

/// Record roles. `train`/`test` are greedy evaluations on the two seed sets
/// under the original reward. `train_seen` is a greedy evaluation on the
/// train seeds under the reward the learner was trained on, and `rollout`
/// is the return of a training episode as the learner experienced it.
/// `robust` is a test-seed evaluation under a perturbation.
namespace role {
inline constexpr const char* kTrain = "train";
inline constexpr const char* kTest = "test";
inline constexpr const char* kTrainSeen = "train_seen";
inline constexpr const char* kRollout = "rollout";
inline constexpr const char* kRobust = "robust";
}  // namespace role

struct MetricsRecord {
  std::string run_id;
  std::uint64_t step = 0;     // environment steps taken by the learner so far
  std::uint64_t episode = 0;  // training episodes completed so far
  std::uint64_t seed = 0;
  std::string role;
  double ret = 0.0;           // undiscounted episode return
  std::string wrapper_json;   // settings snapshot, never contains newlines
  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// Append-only list of per-episode returns.
class MetricsLog {
 public:
  void append(MetricsRecord r);
  void extend(const MetricsLog& other);
  const std::vector<MetricsRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

 private:
  std::vector<MetricsRecord> records_;
};

inline constexpr const char* kMetricsHeader = "run_id,step,episode,seed,role,return,wrapper_json";

/// CSV with the header above. wrapper_json is the last column and is taken
/// verbatim up to the end of the line, so it needs no quoting.
void write_metrics(const MetricsLog& log, std::ostream& out);
void write_metrics(const MetricsLog& log, const std::filesystem::path& path);
MetricsLog read_metrics(std::istream& in);
MetricsLog read_metrics(const std::filesystem::path& path);

/// Per-step rewards of evaluation episodes, used to recompute returns
/// independently of the evaluation path.
struct TrajectoryStep {
  std::string run_id;
  std::string role;
  std::uint64_t seed = 0;
  std::uint64_t t = 0;
  double reward = 0.0;
};

class TrajectoryLog {
 public:
  void append(TrajectoryStep s) { steps_.push_back(std::move(s)); }
  void extend(const TrajectoryLog& other);
  const std::vector<TrajectoryStep>& steps() const noexcept { return steps_; }

 private:
  std::vector<TrajectoryStep> steps_;
};

inline constexpr const char* kTrajectoryHeader = "run_id,role,seed,t,reward";

void write_trajectories(const TrajectoryLog& log, const std::filesystem::path& path);
TrajectoryLog read_trajectories(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace rlprobe
