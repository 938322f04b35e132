#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace locdiff {

/// Minimal static SVG output: line charts with optional shaded bands, and
/// matrix heatmaps. Everything is a pure function of the numeric inputs.

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  std::string label;
};

struct SvgBand {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
  std::string color = "#1f77b4";
  double opacity = 0.25;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
  std::vector<SvgBand> bands;
  bool log_y = false;
};

void write_line_plot(const std::filesystem::path& path, const LinePlot& plot);

struct Heatmap {
  std::string title;
  Eigen::MatrixXd values;
  bool log10_abs = false;  // plot log10(|v|) with a floor
  double floor = 1e-12;
};

void write_heatmap(const std::filesystem::path& path, const Heatmap& map);

}  // namespace locdiff
