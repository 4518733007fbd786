#pragma once

// Static SVG charts for the run reports. Output depends only on the inputs,
// so re-rendering the same data gives byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "loadattack/error.hpp"

namespace loadattack::report {

struct Series {
  std::string label;
  std::vector<double> y;
  std::string color;
  bool dashed = false;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  if (std::abs(v) >= 100.0 || v == std::round(v)) std::snprintf(buf, sizeof buf, "%.0f", v);
  else std::snprintf(buf, sizeof buf, "%.2g", v);
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
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double w = 720, h = 400, left = 70, right = 20, top = 40, bottom = 50;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

inline std::string open(const Frame& f, const std::string& title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.w) + "\" height=\"" + num(f.h) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) + "</text>\n";
  return s;
}

// Round the range out to a step from {1, 2, 5} x 10^k.
inline void nice_range(double& lo, double& hi, double& step) {
  if (!(hi > lo)) {
    const double pad = std::max(1.0, std::abs(lo) * 0.05);
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  step = (r <= 1.0 ? 1.0 : r <= 2.0 ? 2.0 : r <= 5.0 ? 5.0 : 10.0) * mag;
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;
}

inline std::string axes(const Frame& f, double ystep, const std::string& xlabel, const std::string& ylabel) {
  std::string s;
  for (double y = f.y0; y <= f.y1 + 1e-9 * ystep; y += ystep) {
    s += "<line x1=\"" + num(f.left) + "\" x2=\"" + num(f.w - f.right) + "\" y1=\"" + num(f.py(y)) + "\" y2=\"" +
         num(f.py(y)) + "\" stroke=\"#e0e0e0\"/>\n";
    s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.py(y) + 4) + "\" text-anchor=\"end\">" + tick(y) + "</text>\n";
  }
  s += "<line x1=\"" + num(f.left) + "\" x2=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" y2=\"" +
       num(f.h - f.bottom) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(f.left) + "\" x2=\"" + num(f.w - f.right) + "\" y1=\"" + num(f.h - f.bottom) + "\" y2=\"" +
       num(f.h - f.bottom) + "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num((f.left + f.w - f.right) / 2) + "\" y=\"" + num(f.h - 12) + "\" text-anchor=\"middle\">" +
       escape(xlabel) + "</text>\n";
  s += "<text transform=\"translate(16," + num((f.top + f.h - f.bottom) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(ylabel) + "</text>\n";
  return s;
}

inline std::string legend(const Frame& f, const std::vector<std::pair<std::string, std::string>>& items) {
  std::string s;
  double y = f.top + 8;
  for (const auto& [label, color] : items) {
    const double x = f.w - f.right - 170;
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 8) + "\" width=\"12\" height=\"10\" fill=\"" + color + "\"/>\n";
    s += "<text x=\"" + num(x + 18) + "\" y=\"" + num(y + 1) + "\">" + escape(label) + "</text>\n";
    y += 16;
  }
  return s;
}

}  // namespace detail

// Line chart over x = 0..n-1 (or the given x values).
inline std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<Series>& series, std::vector<double> x = {}) {
  require(!series.empty(), Errc::InvalidConfig, "line chart needs a series");
  const std::size_t n = series.front().y.size();
  require(n >= 1, Errc::InvalidConfig, "line chart needs points");
  for (const auto& s : series) require(s.y.size() == n, Errc::ShapeMismatch, "series lengths differ");
  if (x.empty())
    for (std::size_t i = 0; i < n; ++i) x.push_back(static_cast<double>(i));
  require(x.size() == n, Errc::ShapeMismatch, "x length differs from series");

  detail::Frame f;
  f.x0 = x.front();
  f.x1 = n > 1 ? x.back() : x.front() + 1.0;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series)
    for (double v : s.y)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  double step;
  detail::nice_range(lo, hi, step);
  f.y0 = lo;
  f.y1 = hi;

  std::string out = detail::open(f, title) + detail::axes(f, step, xlabel, ylabel);
  const std::size_t every = std::max<std::size_t>(1, n / 12);
  for (std::size_t i = 0; i < n; i += every)
    out += "<text x=\"" + detail::num(f.px(x[i])) + "\" y=\"" + detail::num(f.h - f.bottom + 16) +
           "\" text-anchor=\"middle\">" + detail::tick(x[i]) + "</text>\n";
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += detail::num(f.px(x[i])) + "," + detail::num(f.py(s.y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
           (s.dashed ? std::string(" stroke-dasharray=\"6,4\"") : std::string()) + " points=\"" + pts + "\"/>\n";
    items.emplace_back(s.label, s.color);
  }
  out += detail::legend(f, items);
  return out + "</svg>\n";
}

// Grouped bars: one group per category, one bar per series.
inline std::string bar_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::vector<std::string>& categories, const std::vector<Series>& series) {
  require(!series.empty() && !categories.empty(), Errc::InvalidConfig, "bar chart needs data");
  for (const auto& s : series) require(s.y.size() == categories.size(), Errc::ShapeMismatch, "bar series length");
  detail::Frame f;
  f.x0 = 0.0;
  f.x1 = static_cast<double>(categories.size());
  double lo = 0.0, hi = 0.0;
  for (const auto& s : series)
    for (double v : s.y) hi = std::max(hi, v);
  if (hi <= 0.0) hi = 1.0;
  double step;
  detail::nice_range(lo, hi, step);
  f.y0 = 0.0;
  f.y1 = hi;

  std::string out = detail::open(f, title) + detail::axes(f, step, xlabel, ylabel);
  const double group = f.px(1.0) - f.px(0.0);
  const double bw = group * 0.8 / static_cast<double>(series.size());
  std::vector<std::pair<std::string, std::string>> items;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = f.px(static_cast<double>(c)) + group * 0.1;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = series[k].y[c];
      const double top = f.py(v);
      out += "<rect x=\"" + detail::num(gx + bw * static_cast<double>(k)) + "\" y=\"" + detail::num(top) +
             "\" width=\"" + detail::num(bw * 0.95) + "\" height=\"" + detail::num(f.py(0.0) - top) + "\" fill=\"" +
             series[k].color + "\"/>\n";
    }
    out += "<text x=\"" + detail::num(f.px(static_cast<double>(c) + 0.5)) + "\" y=\"" +
           detail::num(f.h - f.bottom + 16) + "\" text-anchor=\"middle\">" + detail::escape(categories[c]) + "</text>\n";
  }
  for (const auto& s : series) items.emplace_back(s.label, s.color);
  out += detail::legend(f, items);
  return out + "</svg>\n";
}

}  // namespace loadattack::report
