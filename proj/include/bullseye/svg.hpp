#pragma once

#include <string>
#include <vector>

// Minimal deterministic SVG charts. Every chart is drawn from plain vectors
// so the same data can be written next to it as CSV.
namespace bullseye::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  ///< dots instead of a polyline
  std::string color = "#1f77b4";
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

std::string line_chart(const Axes& axes, const std::vector<Series>& series);

/// Vertical bars centred on integer positions.
std::string bar_chart(const Axes& axes, const std::vector<int>& position, const std::vector<double>& height);

/// Half-polar plot of intensity versus polar angle (0 to 90 degrees), with
/// dashed rays at the given collection half-angles.
std::string polar_chart(const std::string& title, const std::vector<double>& theta_deg,
                        const std::vector<double>& intensity, const std::vector<double>& cone_deg = {});

}  // namespace bullseye::svg
