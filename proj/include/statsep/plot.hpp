#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace statsep::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // NaN entries break the line
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  std::size_t width = 640;
  std::size_t height = 420;
};

// RGB line chart with axes, ticks, labels and a legend, written as PNG.
void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<Series>& series);

// Tick positions for an axis range; decades and 2/5 sub-ticks when `log`.
std::vector<double> axis_ticks(double lo, double hi, bool log);

}  // namespace statsep::plot
