#pragma once

// Dependency-free SVG charts: polyline series with confidence bands on
// linear or log axes, plus a state-space scatter with safe-region glyphs.
// Everything is emitted as plain shapes so the files open anywhere.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sarlab {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> band_half;  // empty, or one half-width per point
  bool dashed = false;            // reference lines
  bool markers = true;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  int width = 860, height = 560;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
};

namespace svgdetail {

inline std::string esc(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return kColors[i % (sizeof kColors / sizeof kColors[0])];
}

struct AxisScale {
  double lo = 0.0, hi = 1.0;  // in plot space (log10 when logarithmic)
  bool log = false;

  double to_unit(double v) const {
    const double t = log ? std::log10(v) : v;
    return (t - lo) / (hi - lo);
  }
};

/// Collects finite (and, on log axes, positive) values and pads degenerate
/// ranges so a single point still renders.
inline AxisScale fit_axis(const std::vector<double>& values, bool log) {
  AxisScale s;
  s.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v) || (log && v <= 0.0)) continue;
    const double t = log ? std::log10(v) : v;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (!(lo <= hi)) {  // nothing usable
    lo = log ? 0.0 : 0.0;
    hi = log ? 1.0 : 1.0;
  }
  if (hi - lo < 1e-12) {
    const double pad = log ? 0.5 : (lo == 0.0 ? 1.0 : std::abs(lo) * 0.1);
    lo -= pad;
    hi += pad;
  } else {
    const double pad = (hi - lo) * 0.05;
    lo -= pad;
    hi += pad;
  }
  s.lo = lo;
  s.hi = hi;
  return s;
}

struct Tick {
  double pos;  // plot space
  std::string label;
};

inline std::vector<Tick> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  std::vector<Tick> ticks;
  const double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + step * 1e-9; v += step) {
    const double snapped = std::abs(v) < step * 1e-6 ? 0.0 : v;
    ticks.push_back({snapped, fmt(snapped)});
  }
  return ticks;
}

inline std::vector<Tick> log_ticks(double lo, double hi) {
  std::vector<Tick> ticks;
  const int d0 = int(std::ceil(lo - 1e-9)), d1 = int(std::floor(hi + 1e-9));
  const int stride = std::max(1, (d1 - d0) / 8 + ((d1 - d0) % 8 ? 1 : 0));
  for (int d = d0; d <= d1; d += stride) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "1e%d", d);
    ticks.push_back({double(d), buf});
  }
  if (ticks.empty()) ticks.push_back({(lo + hi) / 2.0, fmt(std::pow(10.0, (lo + hi) / 2.0))});
  return ticks;
}

}  // namespace svgdetail

inline std::string render_line_chart(const PlotSpec& spec) {
  using namespace svgdetail;
  const double ml = 72, mr = 18, mt = spec.title.empty() ? 16 : 40, mb = 52;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;

  std::vector<double> all_x, all_y;
  for (const Series& s : spec.series) {
    all_x.insert(all_x.end(), s.x.begin(), s.x.end());
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      const double h = i < s.band_half.size() ? s.band_half[i] : 0.0;
      all_y.push_back(s.y[i] - h);
      all_y.push_back(s.y[i] + h);
    }
  }
  const AxisScale xs = fit_axis(all_x, spec.log_x);
  const AxisScale ys = fit_axis(all_y, spec.log_y);
  auto px = [&](double v) { return ml + xs.to_unit(v) * pw; };
  auto py = [&](double v) { return mt + (1.0 - ys.to_unit(v)) * ph; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0.0) &&
           (!spec.log_y || y > 0.0);
  };

  std::string out;
  out.reserve(16384);
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
         "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"12\">\n";

  if (!spec.title.empty())
    out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           esc(spec.title) + "</text>\n";

  // frame and ticks
  out += "<rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" + fmt(pw) + "\" height=\"" +
         fmt(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  const auto xticks = xs.log ? log_ticks(xs.lo, xs.hi) : linear_ticks(xs.lo, xs.hi);
  for (const Tick& t : xticks) {
    const double gx = ml + (t.pos - xs.lo) / (xs.hi - xs.lo) * pw;
    out += "<line x1=\"" + fmt(gx) + "\" y1=\"" + fmt(mt) + "\" x2=\"" + fmt(gx) + "\" y2=\"" +
           fmt(mt + ph) + "\" stroke=\"#ddd\"/>\n";
    out += "<text x=\"" + fmt(gx) + "\" y=\"" + fmt(mt + ph + 16) +
           "\" text-anchor=\"middle\">" + esc(t.label) + "</text>\n";
  }
  const auto yticks = ys.log ? log_ticks(ys.lo, ys.hi) : linear_ticks(ys.lo, ys.hi);
  for (const Tick& t : yticks) {
    const double gy = mt + (1.0 - (t.pos - ys.lo) / (ys.hi - ys.lo)) * ph;
    out += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(gy) + "\" x2=\"" + fmt(ml + pw) +
           "\" y2=\"" + fmt(gy) + "\" stroke=\"#ddd\"/>\n";
    out += "<text x=\"" + fmt(ml - 6) + "\" y=\"" + fmt(gy + 4) + "\" text-anchor=\"end\">" +
           esc(t.label) + "</text>\n";
  }
  if (!spec.x_label.empty())
    out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"" + fmt(double(spec.height) - 10) +
           "\" text-anchor=\"middle\">" + esc(spec.x_label) + "</text>\n";
  if (!spec.y_label.empty())
    out += "<text x=\"16\" y=\"" + fmt(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           fmt(mt + ph / 2) + ")\">" + esc(spec.y_label) + "</text>\n";

  // bands first so every line draws on top
  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    if (s.band_half.size() != s.y.size()) continue;
    std::string upper, lower;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double yu = s.y[i] + s.band_half[i], yl = s.y[i] - s.band_half[i];
      if (!usable(s.x[i], yu) || !usable(s.x[i], yl)) continue;
      upper += fmt(px(s.x[i])) + "," + fmt(py(yu)) + " ";
      lower = fmt(px(s.x[i])) + "," + fmt(py(yl)) + " " + lower;
    }
    if (upper.empty()) continue;
    out += "<polygon points=\"" + upper + lower + "\" fill=\"" + palette(si) +
           "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
  }

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
    }
    const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
    if (!pts.empty())
      out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + palette(si) +
             "\" stroke-width=\"1.8\"" + dash + "/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!usable(s.x[i], s.y[i])) continue;
        out += "<circle cx=\"" + fmt(px(s.x[i])) + "\" cy=\"" + fmt(py(s.y[i])) +
               "\" r=\"3\" fill=\"" + palette(si) + "\"/>\n";
      }
  }

  // legend
  double ly = mt + 14;
  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    if (s.label.empty()) continue;
    const double lx = ml + pw - 180;
    const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
    out += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(lx + 26) +
           "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + palette(si) + "\" stroke-width=\"2\"" +
           dash + "/>\n";
    out += "<text x=\"" + fmt(lx + 32) + "\" y=\"" + fmt(ly) + "\">" + esc(s.label) + "</text>\n";
    ly += 17;
  }

  out += "</g>\n</svg>\n";
  return out;
}

// ---------------------------------------------------------------------------
// State-space scatter with safe-region glyphs: an L1 ball in two plotted
// dimensions is a diamond, an L2 ball a circle.

struct RegionGlyph {
  double x = 0.0, y = 0.0, r = 0.0;
  bool diamond = true;
  bool highlight = false;  // e.g. decisions with an external force applied
};

struct ScatterSpec {
  std::string title, x_label, y_label;
  int width = 720, height = 720;
  std::vector<double> px, py;  // anchor points
  std::vector<RegionGlyph> glyphs;
};

inline std::string render_region_scatter(const ScatterSpec& spec) {
  using namespace svgdetail;
  const double ml = 64, mr = 18, mt = spec.title.empty() ? 16 : 40, mb = 48;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;

  std::vector<double> all_x(spec.px), all_y(spec.py);
  for (const RegionGlyph& g : spec.glyphs) {
    all_x.push_back(g.x - g.r);
    all_x.push_back(g.x + g.r);
    all_y.push_back(g.y - g.r);
    all_y.push_back(g.y + g.r);
  }
  const AxisScale xs = fit_axis(all_x, false);
  const AxisScale ys = fit_axis(all_y, false);
  auto to_px = [&](double v) { return ml + xs.to_unit(v) * pw; };
  auto to_py = [&](double v) { return mt + (1.0 - ys.to_unit(v)) * ph; };
  const double sx = pw / (xs.hi - xs.lo), sy = ph / (ys.hi - ys.lo);

  std::string out;
  out.reserve(16384);
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
         "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  if (!spec.title.empty())
    out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           esc(spec.title) + "</text>\n";
  out += "<rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" + fmt(pw) + "\" height=\"" +
         fmt(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (const Tick& t : linear_ticks(xs.lo, xs.hi)) {
    const double gx = ml + (t.pos - xs.lo) / (xs.hi - xs.lo) * pw;
    out += "<text x=\"" + fmt(gx) + "\" y=\"" + fmt(mt + ph + 16) +
           "\" text-anchor=\"middle\">" + esc(t.label) + "</text>\n";
  }
  for (const Tick& t : linear_ticks(ys.lo, ys.hi)) {
    const double gy = mt + (1.0 - (t.pos - ys.lo) / (ys.hi - ys.lo)) * ph;
    out += "<text x=\"" + fmt(ml - 6) + "\" y=\"" + fmt(gy + 4) + "\" text-anchor=\"end\">" +
           esc(t.label) + "</text>\n";
  }
  if (!spec.x_label.empty())
    out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"" + fmt(double(spec.height) - 8) +
           "\" text-anchor=\"middle\">" + esc(spec.x_label) + "</text>\n";
  if (!spec.y_label.empty())
    out += "<text x=\"14\" y=\"" + fmt(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           fmt(mt + ph / 2) + ")\">" + esc(spec.y_label) + "</text>\n";

  for (const RegionGlyph& g : spec.glyphs) {
    const char* color = g.highlight ? "#d62728" : "#1f77b4";
    if (g.diamond) {
      out += "<polygon points=\"";
      out += fmt(to_px(g.x + g.r)) + "," + fmt(to_py(g.y)) + " ";
      out += fmt(to_px(g.x)) + "," + fmt(to_py(g.y + g.r)) + " ";
      out += fmt(to_px(g.x - g.r)) + "," + fmt(to_py(g.y)) + " ";
      out += fmt(to_px(g.x)) + "," + fmt(to_py(g.y - g.r));
      out += "\" fill=\"" + std::string(color) + "\" fill-opacity=\"0.10\" stroke=\"" + color +
             "\" stroke-opacity=\"0.5\"/>\n";
    } else {
      out += "<ellipse cx=\"" + fmt(to_px(g.x)) + "\" cy=\"" + fmt(to_py(g.y)) + "\" rx=\"" +
             fmt(g.r * sx) + "\" ry=\"" + fmt(g.r * sy) + "\" fill=\"" + color +
             "\" fill-opacity=\"0.10\" stroke=\"" + color + "\" stroke-opacity=\"0.5\"/>\n";
    }
  }
  for (std::size_t i = 0; i < spec.px.size() && i < spec.py.size(); ++i)
    out += "<circle cx=\"" + fmt(to_px(spec.px[i])) + "\" cy=\"" + fmt(to_py(spec.py[i])) +
           "\" r=\"2\" fill=\"#333\"/>\n";

  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace sarlab
