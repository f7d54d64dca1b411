#pragma once

// Standalone SVG renderings of the report CSVs. Coordinates are printed with
// fixed precision so identical inputs give identical files.

#include <string>
#include <vector>

#include "groundcheck/calibrate.hpp"

namespace groundcheck {

struct ScatterPoint {
  double reliability = 0.0;
  double chair = 0.0;
};

/// Reliability (x) vs. CHAIR (y) with the isotonic readout CHAIR = ISO(1 - R)
/// drawn over [0, 1] when given.
std::string render_scatter_svg(const std::vector<ScatterPoint>& points, const IsotonicModel* iso,
                               const std::string& title);

struct LineSeries {
  std::string name;
  std::vector<double> y;
};

/// Line chart over a shared x axis and a shared y range.
std::string render_line_chart_svg(const std::vector<double>& x, const std::vector<LineSeries>& series,
                                  const std::string& x_label, const std::string& title);

}  // namespace groundcheck
