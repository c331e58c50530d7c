#include "bullseye/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "bullseye/constants.hpp"
#include "bullseye/error.hpp"

namespace bullseye::svg {

namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 20.0, kTop = 36.0, kBottom = 50.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + "<text x=\"" + num(kWidth / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
}

// 1, 2, 5 decade steps giving about six ticks.
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    step = f * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  }
  return ticks;
}

struct Frame {
  double x0, x1, y0, y1;
  bool log_y;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    const double v = log_y ? std::log10(y) : y;
    return kHeight - kBottom - (v - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

std::string axes_svg(const Frame& f, const Axes& a) {
  std::string s;
  const double bx = kLeft, by = kHeight - kBottom, tx = kWidth - kRight;
  s += "<rect x=\"" + num(bx) + "\" y=\"" + num(kTop) + "\" width=\"" + num(tx - bx) + "\" height=\"" +
       num(by - kTop) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : nice_ticks(f.x0, f.x1)) {
    const double x = f.px(t);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(by) + "\" x2=\"" + num(x) + "\" y2=\"" + num(by + 5) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(by + 18) + "\" text-anchor=\"middle\">" + tick_label(t) + "</text>\n";
  }
  if (f.log_y) {
    for (double d = std::ceil(f.y0); d <= f.y1; d += 1.0) {
      const double y = f.py(std::pow(10.0, d));
      s += "<line x1=\"" + num(bx - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(bx) + "\" y2=\"" + num(y) +
           "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + num(bx - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">1e" +
           std::to_string(static_cast<int>(d)) + "</text>\n";
    }
  } else {
    for (double t : nice_ticks(f.y0, f.y1)) {
      const double y = f.py(t);
      s += "<line x1=\"" + num(bx - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(bx) + "\" y2=\"" + num(y) +
           "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + num(bx - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + tick_label(t) +
           "</text>\n";
    }
  }
  s += "<text x=\"" + num((bx + tx) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
       escape(a.x_label) + "</text>\n";
  s += "<text transform=\"translate(16 " + num((kTop + by) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(a.y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string line_chart(const Axes& a, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw Error(ErrorKind::InvalidArgument, "series x and y differ in length");
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      if (a.log_y && !(s.y[k] > 0.0)) continue;
      const double v = a.log_y ? std::log10(s.y[k]) : s.y[k];
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (!(x1 > x0)) {
    x0 = std::isfinite(x0) ? x0 - 1.0 : 0.0;
    x1 = x0 + 2.0;
  }
  if (!(y1 > y0)) {
    y0 = std::isfinite(y0) ? y0 - 1.0 : 0.0;
    y1 = y0 + 2.0;
  }
  if (a.log_y) {
    y0 = std::floor(y0);
    y1 = std::ceil(y1);
  } else {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  const Frame f{x0, x1, y0, y1, a.log_y};
  std::string out = header(a.title) + axes_svg(f, a);
  double legend_y = kTop + 16;
  for (const auto& s : series) {
    if (s.markers) {
      out += "<g fill=\"" + s.color + "\">\n";
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (a.log_y && !(s.y[k] > 0.0)) continue;
        out += "<circle cx=\"" + num(f.px(s.x[k])) + "\" cy=\"" + num(f.py(s.y[k])) + "\" r=\"2\"/>\n";
      }
      out += "</g>\n";
    } else {
      out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (a.log_y && !(s.y[k] > 0.0)) continue;
        out += (first ? "" : " ") + num(f.px(s.x[k])) + "," + num(f.py(s.y[k]));
        first = false;
      }
      out += "\"/>\n";
    }
    if (!s.label.empty()) {
      out += "<text x=\"" + num(kWidth - kRight - 8) + "\" y=\"" + num(legend_y) + "\" text-anchor=\"end\" fill=\"" +
             s.color + "\">" + escape(s.label) + "</text>\n";
      legend_y += 16;
    }
  }
  return out + "</svg>\n";
}

std::string bar_chart(const Axes& a, const std::vector<int>& position, const std::vector<double>& height) {
  if (position.size() != height.size()) throw Error(ErrorKind::InvalidArgument, "bar positions and heights differ");
  if (position.empty()) throw Error(ErrorKind::InvalidArgument, "no bars to draw");
  const auto [pmin, pmax] = std::minmax_element(position.begin(), position.end());
  const double top = std::max(1e-12, *std::max_element(height.begin(), height.end()));
  const Frame f{*pmin - 1.0, *pmax + 1.0, 0.0, 1.1 * top, false};
  std::string out = header(a.title) + axes_svg(f, a);
  const double half = 0.35 * (f.px(1.0) - f.px(0.0));
  out += "<g fill=\"#4c72b0\">\n";
  for (std::size_t k = 0; k < position.size(); ++k) {
    const double x = f.px(position[k]);
    const double y = f.py(std::max(0.0, height[k]));
    out += "<rect x=\"" + num(x - half) + "\" y=\"" + num(y) + "\" width=\"" + num(2 * half) + "\" height=\"" +
           num(f.py(0.0) - y) + "\"/>\n";
  }
  return out + "</g>\n</svg>\n";
}

std::string polar_chart(const std::string& title, const std::vector<double>& theta_deg,
                        const std::vector<double>& intensity, const std::vector<double>& cone_deg) {
  if (theta_deg.size() != intensity.size() || theta_deg.empty()) {
    throw Error(ErrorKind::InvalidArgument, "polar data must be non-empty and of equal length");
  }
  const double peak = std::max(1e-300, *std::max_element(intensity.begin(), intensity.end()));
  const double cx = kWidth / 2, cy = kHeight - 40, radius = kHeight - 90;
  const double deg = constants::pi / 180.0;
  auto at = [&](double th, double rho) {
    return std::pair{cx + rho * radius * std::sin(th * deg), cy - rho * radius * std::cos(th * deg)};
  };
  auto point = [&](double th, double rho) {
    const auto [x, y] = at(th, rho);
    return num(x) + "," + num(y);
  };
  auto ray = [&](double th, const std::string& style) {
    const auto [x, y] = at(th, 1.0);
    return "<line x1=\"" + num(cx) + "\" y1=\"" + num(cy) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y) + "\" " + style +
           "/>\n";
  };
  std::string out = header(title);
  for (double rho : {0.25, 0.5, 0.75, 1.0}) {
    out += "<path d=\"M " + point(-90, rho) + " A " + num(rho * radius) + " " + num(rho * radius) + " 0 0 1 " +
           point(90, rho) + "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
  }
  for (double th = -90.0; th <= 90.0; th += 30.0) {
    out += ray(th, "stroke=\"#cccccc\"");
    const auto [x, y] = at(th, 1.07);
    out += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"middle\">" + tick_label(std::abs(th)) +
           "</text>\n";
  }
  for (double c : cone_deg) {
    for (double sgn : {-1.0, 1.0}) out += ray(sgn * c, "stroke=\"#d62728\" stroke-dasharray=\"6 4\"");
  }
  // The azimuthally averaged pattern is mirrored to both sides of the normal.
  out += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t k = theta_deg.size(); k-- > 0;) out += point(-theta_deg[k], intensity[k] / peak) + " ";
  for (std::size_t k = 0; k < theta_deg.size(); ++k) {
    out += point(theta_deg[k], intensity[k] / peak) + (k + 1 < theta_deg.size() ? " " : "");
  }
  out += "\"/>\n";
  return out + "</svg>\n";
}

}  // namespace bullseye::svg
