#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rlprobe/metrics.hpp"

namespace rlprobe {

struct Series {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

/// Standalone SVG 1.1 document with one panel per entry of `panels`,
/// stacked vertically; each panel is (y label, series).
std::string svg_chart(const std::string& title, const std::string& x_label,
                      const std::vector<std::pair<std::string, std::vector<Series>>>& panels);

struct ReportFiles {
  std::vector<std::filesystem::path> charts;
  std::filesystem::path summary;
};

/// One SVG per cell (train/test returns and gap against learner steps) and
/// summary.txt with the final-evaluation table.
ReportFiles emit_report(const MetricsLog& log, const std::filesystem::path& dir);

}  // namespace rlprobe
