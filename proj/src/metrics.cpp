#include "rlprobe/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rlprobe {

namespace {

std::vector<std::string_view> split_n(std::string_view line, std::size_t fields) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (out.size() + 1 < fields) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) break;
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  out.push_back(line.substr(start));
  return out;
}

std::uint64_t parse_u64(std::string_view s, std::size_t line_no) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
  return v;
}

double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void MetricsLog::append(MetricsRecord r) {
  if (!std::isfinite(r.ret)) throw std::invalid_argument("MetricsLog: non-finite return for " + r.run_id);
  if (r.wrapper_json.find('\n') != std::string::npos || r.run_id.find(',') != std::string::npos ||
      r.role.find(',') != std::string::npos)
    throw std::invalid_argument("MetricsLog: field would break the CSV layout");
  records_.push_back(std::move(r));
}

void MetricsLog::extend(const MetricsLog& other) {
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

void write_metrics(const MetricsLog& log, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& r : log.records())
    out << r.run_id << ',' << r.step << ',' << r.episode << ',' << r.seed << ',' << r.role << ','
        << format_double(r.ret) << ',' << r.wrapper_json << '\n';
}

void write_metrics(const MetricsLog& log, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_metrics(log, out);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

MetricsLog read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error("metrics CSV: missing header");
  MetricsLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_n(line, 7);
    if (f.size() != 7) throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": expected 7 fields");
    MetricsRecord r;
    r.run_id = std::string(f[0]);
    r.step = parse_u64(f[1], line_no);
    r.episode = parse_u64(f[2], line_no);
    r.seed = parse_u64(f[3], line_no);
    r.role = std::string(f[4]);
    r.ret = parse_double(f[5], line_no);
    r.wrapper_json = std::string(f[6]);
    log.append(std::move(r));
  }
  return log;
}

MetricsLog read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  try {
    return read_metrics(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void TrajectoryLog::extend(const TrajectoryLog& other) {
  steps_.insert(steps_.end(), other.steps_.begin(), other.steps_.end());
}

void write_trajectories(const TrajectoryLog& log, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kTrajectoryHeader << '\n';
  for (const auto& s : log.steps())
    out << s.run_id << ',' << s.role << ',' << s.seed << ',' << s.t << ',' << format_double(s.reward) << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

TrajectoryLog read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader)
    throw std::runtime_error(path.string() + ": missing trajectory header");
  TrajectoryLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_n(line, 5);
    if (f.size() != 5) throw std::runtime_error(path.string() + ": bad line " + std::to_string(line_no));
    log.append({std::string(f[0]), std::string(f[1]), parse_u64(f[2], line_no), parse_u64(f[3], line_no),
                parse_double(f[4], line_no)});
  }
  return log;
}

}  // namespace rlprobe
