#include "rlprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rlprobe/harness.hpp"

namespace rlprobe {

namespace {

constexpr double kWidth = 640.0;
constexpr double kPanelHeight = 260.0;
constexpr double kLeft = 70.0, kRight = 130.0, kTop = 40.0, kBottom = 40.0;

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

void panel(std::ostringstream& out, double y0, const std::string& x_label, const std::string& y_label,
           const std::vector<Series>& series) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x), xmax = std::max(xmax, x);
      ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kPanelHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return y0 + kTop + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  out << "<rect x=\"" << kLeft << "\" y=\"" << y0 + kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(fy) << "\" y2=\"" << py(fy)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << num(fy) << "</text>\n";
    out << "<text x=\"" << px(fx) << "\" y=\"" << y0 + kTop + ph + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << num(fx) << "</text>\n";
  }
  if (ymin < 0.0 && ymax > 0.0)
    out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(0) << "\" y2=\"" << py(0)
        << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << y0 + kPanelHeight - 6
      << "\" text-anchor=\"middle\" font-size=\"12\">" << esc(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << y0 + kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << y0 + kTop + ph / 2 << ")\">" << esc(y_label) << "</text>\n";

  double ly = y0 + kTop + 10;
  for (const auto& s : series) {
    if (!s.points.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
      for (const auto& [x, y] : s.points) out << num(px(x)) << ',' << num(py(y)) << ' ';
      out << "\"/>\n";
      for (const auto& [x, y] : s.points)
        out << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"2.5\" fill=\"" << s.color
            << "\"/>\n";
    }
    out << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 32 << "\" y1=\"" << ly
        << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << esc(s.name)
        << "</text>\n";
    ly += 18;
  }
}

std::string file_stem(const std::string& cell) {
  std::string s;
  for (char c : cell) s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_');
  return s;
}

}  // namespace

std::string svg_chart(const std::string& title, const std::string& x_label,
                      const std::vector<std::pair<std::string, std::vector<Series>>>& panels) {
  const double height = 30.0 + kPanelHeight * static_cast<double>(panels.size());
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title)
      << "</text>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    panel(out, 30.0 + kPanelHeight * static_cast<double>(i) - 10.0, x_label, panels[i].first, panels[i].second);
  out << "</svg>\n";
  return out.str();
}

ReportFiles emit_report(const MetricsLog& log, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ReportFiles files;
  const auto cells = summarize_cells(log);
  for (const auto& cell : cells) {
    const auto curve = cell_curve(log, cell.cell_id);
    Series train{"train", "#1f77b4", {}}, test{"test", "#d62728", {}}, gap{"gap", "#2ca02c", {}};
    for (const auto& p : curve) {
      train.points.emplace_back(p.step, p.train.mean);
      test.points.emplace_back(p.step, p.test.mean);
      gap.points.emplace_back(p.step, p.gap.mean);
    }
    const auto svg = svg_chart(cell.cell_id + " (" + std::to_string(cell.runs) + " runs)", "environment steps",
                               {{"mean return", {train, test}}, {"train - test", {gap}}});
    const auto path = dir / (file_stem(cell.cell_id) + ".svg");
    std::ofstream out(path);
    out << svg;
    if (!out) throw std::runtime_error(path.string() + ": write failed");
    files.charts.push_back(path);
  }
  files.summary = dir / "summary.txt";
  std::ofstream out(files.summary);
  out << summary_table(cells);
  if (!out) throw std::runtime_error(files.summary.string() + ": write failed");
  return files;
}

}  // namespace rlprobe
