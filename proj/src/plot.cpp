#include "kecbf/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace kecbf {

namespace {

constexpr int kWidth = 760, kHeight = 480;
constexpr int kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void absorb(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finalize() {
    if (!(lo <= hi)) { lo = 0.0; hi = 1.0; }
    if (lo == hi) { lo -= 0.5; hi += 0.5; }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

} // namespace

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open plot file for writing: " + path);

  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.absorb(v);
    for (double v : s.y) yr.absorb(v);
  }
  xr.finalize();
  yr.finalize();

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * plot_h; };

  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
      << kHeight << "' font-family='sans-serif' font-size='12'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' font-size='15'>"
      << title << "</text>\n";

  // Grid and tick labels.
  const int ticks = 6;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / ticks;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / ticks;
    out << "<line x1='" << px(fx) << "' y1='" << kTop << "' x2='" << px(fx) << "' y2='"
        << kTop + plot_h << "' stroke='#dddddd'/>\n";
    out << "<line x1='" << kLeft << "' y1='" << py(fy) << "' x2='" << kLeft + plot_w
        << "' y2='" << py(fy) << "' stroke='#dddddd'/>\n";
    out << "<text x='" << px(fx) << "' y='" << kTop + plot_h + 18
        << "' text-anchor='middle'>" << fmt(fx) << "</text>\n";
    out << "<text x='" << kLeft - 8 << "' y='" << py(fy) + 4
        << "' text-anchor='end'>" << fmt(fy) << "</text>\n";
  }
  out << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << plot_w << "' height='"
      << plot_h << "' fill='none' stroke='black'/>\n";
  out << "<text x='" << kLeft + plot_w / 2 << "' y='" << kHeight - 12
      << "' text-anchor='middle'>" << xlabel << "</text>\n";
  out << "<text x='16' y='" << kTop + plot_h / 2
      << "' text-anchor='middle' transform='rotate(-90 16 " << kTop + plot_h / 2 << ")'>"
      << ylabel << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kColors[si % (sizeof kColors / sizeof kColors[0])];
    if (s.points_only) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
            << "' r='3.5' fill='" << color << "'/>\n";
    } else {
      out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5'"
          << (s.dashed ? " stroke-dasharray='6 4'" : "") << " points='";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      out << "'/>\n";
    }
    // Legend entry.
    const double ly = kTop + 16.0 + 18.0 * static_cast<double>(si);
    out << "<line x1='" << kLeft + plot_w - 150 << "' y1='" << ly << "' x2='"
        << kLeft + plot_w - 126 << "' y2='" << ly << "' stroke='" << color
        << "' stroke-width='2'" << (s.dashed ? " stroke-dasharray='6 4'" : "") << "/>\n";
    out << "<text x='" << kLeft + plot_w - 120 << "' y='" << ly + 4 << "'>" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
}

} // namespace kecbf
