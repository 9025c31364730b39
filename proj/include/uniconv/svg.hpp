#pragma once

// Minimal deterministic SVG plots (fixed 800x500 canvas). Numbers are printed
// with fixed precision so identical inputs give identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "uniconv/error.hpp"

namespace uniconv::svg {

enum class Style { line, loglog, step };

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  double step_start = 0.0;  // level before the first jump (step style)
};

struct FitLine {
  double slope = 0.0;
  double intercept = 0.0;  // in ln-ln space for loglog
  std::string label;
};

struct Plot {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  Style style = Style::line;
  std::vector<Series> series;
  std::optional<FitLine> fit;
};

inline constexpr int kWidth = 800;
inline constexpr int kHeight = 500;

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  return palette[i % 6];
}

}  // namespace detail

inline std::string render(const Plot& plot) {
  require(!plot.series.empty(), "plot needs at least one series");
  const bool logs = plot.style == Style::loglog;
  const auto tx = [&](double v) { return logs ? std::log10(v) : v; };

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : plot.series) {
    require(!s.points.empty(), "series '" + s.label + "' is empty");
    for (auto [x, y] : s.points) {
      require(std::isfinite(x) && std::isfinite(y), "non-finite plot value");
      if (logs) require(x > 0.0 && y > 0.0, "loglog plot needs positive values");
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, tx(y));
      ymax = std::max(ymax, tx(y));
    }
    if (plot.style == Style::step) {
      ymin = std::min(ymin, s.step_start);
      ymax = std::max(ymax, s.step_start);
    }
  }
  if (xmax == xmin) { xmin -= 0.5; xmax += 0.5; }
  if (ymax == ymin) { ymin -= 0.5; ymax += 0.5; }
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

  constexpr double left = 80, right = 30, top = 50, bottom = 60;
  const double pw = kWidth - left - right, ph = kHeight - top - bottom;
  const auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double v) { return top + (ymax - v) / (ymax - ymin) * ph; };
  using detail::num;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  out += "<text class=\"title\" x=\"400\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" +
         detail::escape(plot.title) + "</text>\n";
  out += "<rect class=\"frame\" x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0, yv = ymin + (ymax - ymin) * t / 4.0;
    const double xs = logs ? std::pow(10.0, xv) : xv, ys = logs ? std::pow(10.0, yv) : yv;
    char xl[32], yl[32];
    std::snprintf(xl, sizeof xl, "%.3g", xs);
    std::snprintf(yl, sizeof yl, "%.3g", ys);
    out += "<text class=\"tick\" x=\"" + num(px(xv)) + "\" y=\"" + num(top + ph + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + xl + "</text>\n";
    out += "<text class=\"tick\" x=\"" + num(left - 6) + "\" y=\"" + num(py(yv) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + yl + "</text>\n";
  }
  out += "<text class=\"xlabel\" x=\"" + num(left + pw / 2) + "\" y=\"" + num(kHeight - 15.0) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + detail::escape(plot.x_label) + "</text>\n";
  out += "<text class=\"ylabel\" x=\"20\" y=\"" + num(top + ph / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 " + num(top + ph / 2) +
         ")\">" + detail::escape(plot.y_label) + "</text>\n";

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const auto& s = plot.series[si];
    const char* col = detail::color(si);
    if (plot.style == Style::step) {
      double level = s.step_start, from = xmin;
      for (auto [x, y] : s.points) {
        out += "<line class=\"step-h\" x1=\"" + num(px(from)) + "\" y1=\"" + num(py(level)) +
               "\" x2=\"" + num(px(x)) + "\" y2=\"" + num(py(level)) + "\" stroke=\"" + col + "\"/>\n";
        out += "<line class=\"step-v\" x1=\"" + num(px(x)) + "\" y1=\"" + num(py(level)) +
               "\" x2=\"" + num(px(x)) + "\" y2=\"" + num(py(y)) + "\" stroke=\"" + col + "\"/>\n";
        level = y;
        from = x;
      }
      out += "<line class=\"step-h\" x1=\"" + num(px(from)) + "\" y1=\"" + num(py(level)) +
             "\" x2=\"" + num(px(xmax)) + "\" y2=\"" + num(py(level)) + "\" stroke=\"" + col + "\"/>\n";
    } else if (s.points.size() > 1) {
      out += "<polyline class=\"series\" fill=\"none\" stroke=\"" + std::string(col) + "\" points=\"";
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        if (i) out.push_back(' ');
        out += num(px(tx(s.points[i].first))) + "," + num(py(tx(s.points[i].second)));
      }
      out += "\"/>\n";
    }
    for (auto [x, y] : s.points) {
      out += "<circle class=\"marker\" cx=\"" + num(px(tx(x))) + "\" cy=\"" + num(py(tx(y))) +
             "\" r=\"3\" fill=\"" + col + "\"/>\n";
    }
    out += "<text class=\"legend\" x=\"" + num(left + 10) + "\" y=\"" + num(top + 16 + 16.0 * si) +
           "\" font-size=\"12\" fill=\"" + col + "\">" + detail::escape(s.label) + "</text>\n";
  }

  if (plot.fit) {
    // fit is y = slope * x + intercept in the plotted (log10 for loglog) space
    // after converting from natural logs
    const auto& f = *plot.fit;
    const auto fy = [&](double xv) {
      if (!logs) return f.slope * xv + f.intercept;
      return (f.slope * xv * std::log(10.0) + f.intercept) / std::log(10.0);
    };
    out += "<line class=\"fit\" x1=\"" + num(px(xmin + xpad)) + "\" y1=\"" + num(py(fy(xmin + xpad))) +
           "\" x2=\"" + num(px(xmax - xpad)) + "\" y2=\"" + num(py(fy(xmax - xpad))) +
           "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s slope = %.3f", f.label.c_str(), f.slope);
    out += "<text class=\"legend fit-legend\" x=\"" + num(left + 10) + "\" y=\"" +
           num(top + 16 + 16.0 * plot.series.size()) + "\" font-size=\"12\" fill=\"gray\">" +
           detail::escape(buf) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace uniconv::svg
