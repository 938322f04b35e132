#include "locdiff/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "locdiff/errors.hpp"

namespace locdiff {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  double step = std::pow(10.0, std::floor(std::log10(span / target)));
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (span / (step * mult) <= target) {
      step *= mult;
      break;
    }
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) out.push_back(v);
  return out;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const LinePlot& plot) {
  Range rx, ry;
  auto y_of = [&](double v) { return plot.log_y ? std::log10(std::max(v, 1e-300)) : v; };
  for (const auto& s : plot.series) {
    for (double v : s.x) rx.include(v);
    for (double v : s.y) ry.include(y_of(v));
  }
  for (const auto& b : plot.bands) {
    for (double v : b.x) rx.include(v);
    for (double v : b.lo) ry.include(y_of(v));
    for (double v : b.hi) ry.include(y_of(v));
  }
  if (!std::isfinite(rx.lo) || !std::isfinite(ry.lo))
    throw ArgumentError("svg: no finite data to plot");
  rx.pad();
  ry.pad();

  auto px = [&](double v) {
    return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * (kWidth - kLeft - kRight);
  };
  auto py = [&](double v) {
    return kHeight - kBottom - (y_of(v) - ry.lo) / (ry.hi - ry.lo) * (kHeight - kTop - kBottom);
  };

  std::ofstream out(path);
  if (!out) throw ArgumentError("svg: cannot open " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
      << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";

  // axes
  out << "<line x1='" << kLeft << "' y1='" << kHeight - kBottom << "' x2='" << kWidth - kRight
      << "' y2='" << kHeight - kBottom << "' stroke='black'/>\n";
  out << "<line x1='" << kLeft << "' y1='" << kTop << "' x2='" << kLeft << "' y2='"
      << kHeight - kBottom << "' stroke='black'/>\n";
  for (double t : ticks(rx.lo, rx.hi)) {
    const double x = px(t);
    out << "<line x1='" << x << "' y1='" << kHeight - kBottom << "' x2='" << x << "' y2='"
        << kHeight - kBottom + 5 << "' stroke='black'/>\n";
    out << "<text x='" << x << "' y='" << kHeight - kBottom + 18
        << "' font-size='11' text-anchor='middle'>" << short_num(t) << "</text>\n";
  }
  for (double t : ticks(ry.lo, ry.hi)) {
    const double y = kHeight - kBottom - (t - ry.lo) / (ry.hi - ry.lo) * (kHeight - kTop - kBottom);
    out << "<line x1='" << kLeft - 5 << "' y1='" << y << "' x2='" << kLeft << "' y2='" << y
        << "' stroke='black'/>\n";
    const std::string label = plot.log_y ? ("1e" + short_num(t)) : short_num(t);
    out << "<text x='" << kLeft - 8 << "' y='" << y + 4
        << "' font-size='11' text-anchor='end'>" << label << "</text>\n";
  }
  if (!plot.title.empty())
    out << "<text x='" << kWidth / 2 << "' y='20' font-size='14' text-anchor='middle'>"
        << plot.title << "</text>\n";
  if (!plot.x_label.empty())
    out << "<text x='" << kWidth / 2 << "' y='" << kHeight - 10
        << "' font-size='12' text-anchor='middle'>" << plot.x_label << "</text>\n";
  if (!plot.y_label.empty())
    out << "<text x='16' y='" << kHeight / 2 << "' font-size='12' text-anchor='middle' "
        << "transform='rotate(-90 16 " << kHeight / 2 << ")'>" << plot.y_label << "</text>\n";

  for (const auto& b : plot.bands) {
    out << "<polygon fill='" << b.color << "' fill-opacity='" << b.opacity << "' points='";
    for (std::size_t i = 0; i < b.x.size(); ++i) out << px(b.x[i]) << ',' << py(b.hi[i]) << ' ';
    for (std::size_t i = b.x.size(); i-- > 0;) out << px(b.x[i]) << ',' << py(b.lo[i]) << ' ';
    out << "'/>\n";
  }
  for (const auto& s : plot.series) {
    out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    out << "'/>\n";
  }
  // legend
  double ly = kTop + 8;
  for (const auto& s : plot.series) {
    if (s.label.empty()) continue;
    out << "<line x1='" << kWidth - kRight - 140 << "' y1='" << ly << "' x2='"
        << kWidth - kRight - 120 << "' y2='" << ly << "' stroke='" << s.color
        << "' stroke-width='2'/>\n";
    out << "<text x='" << kWidth - kRight - 114 << "' y='" << ly + 4 << "' font-size='11'>"
        << s.label << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
}

void write_heatmap(const std::filesystem::path& path, const Heatmap& map) {
  const Eigen::Index rows = map.values.rows(), cols = map.values.cols();
  if (rows == 0 || cols == 0) throw ArgumentError("svg heatmap: empty matrix");
  Eigen::MatrixXd v = map.values;
  if (map.log10_abs)
    v = v.cwiseAbs().cwiseMax(map.floor).array().log10().matrix();
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  const double span = (hi > lo) ? hi - lo : 1.0;

  const double cell = std::max(1.0, std::floor(480.0 / std::max(rows, cols)));
  const double w = kLeft + cols * cell + kRight, h = kTop + rows * cell + kBottom;
  std::ofstream out(path);
  if (!out) throw ArgumentError("svg: cannot open " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
      << "' viewBox='0 0 " << w << " " << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  if (!map.title.empty())
    out << "<text x='" << w / 2 << "' y='20' font-size='14' text-anchor='middle'>" << map.title
        << "</text>\n";
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double z = (v(r, c) - lo) / span;  // 0 = cold, 1 = hot
      const int red = static_cast<int>(255 * z);
      const int blue = static_cast<int>(255 * (1.0 - z));
      const int green = static_cast<int>(80 * (1.0 - std::abs(2 * z - 1)));
      out << "<rect x='" << kLeft + c * cell << "' y='" << kTop + r * cell << "' width='" << cell
          << "' height='" << cell << "' fill='rgb(" << red << ',' << green << ',' << blue
          << ")'/>\n";
    }
  }
  out << "<text x='" << kLeft << "' y='" << kTop + rows * cell + 20 << "' font-size='11'>"
      << (map.log10_abs ? "log10|v| range [" : "range [") << short_num(lo) << ", "
      << short_num(hi) << "]</text>\n";
  out << "</svg>\n";
}

}  // namespace locdiff
