#pragma once

#include <string>
#include <vector>

namespace kecbf {

/// One curve or point cloud of a plot.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool points_only = false; // scatter markers instead of a polyline
  bool dashed = false;
};

/// Writes a self-contained SVG line/scatter plot. Axis ranges are taken from
/// the data with a small margin.
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series);

} // namespace kecbf
