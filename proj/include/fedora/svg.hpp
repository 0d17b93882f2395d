#pragma once

// Minimal SVG charts for campaign summaries. Plain string building, no
// styling beyond a fixed palette.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fedora::svg {

struct Series {
  std::string name;
  std::vector<double> values;
};

struct BoxGroup {
  std::string name;
  std::vector<double> values;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
inline constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

struct Frame {
  double lo, hi;
  double plot_w() const { return kWidth - kLeft - kRight; }
  double plot_h() const { return kHeight - kTop - kBottom; }
  double y(double v) const { return kTop + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

inline Frame frame_for(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

inline void open(std::ostringstream& out, const std::string& title, const std::string& ylabel,
                 const Frame& f) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << f.plot_w() << "\" height=\""
      << f.plot_h() << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = f.lo + (f.hi - f.lo) * t / 4.0;
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.y(v) + 4 << "\" text-anchor=\"end\">" << num(v)
        << "</text>\n";
  }
  out << "<text transform=\"translate(16," << kTop + f.plot_h() / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(ylabel) << "</text>\n";
}

}  // namespace detail

inline std::string line_chart(const std::string& title, const std::string& xlabel,
                              const std::string& ylabel, const std::vector<Series>& series) {
  using namespace detail;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t len = 0;
  for (const auto& s : series) {
    len = std::max(len, s.values.size());
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (len == 0) lo = hi = 0.0;
  const Frame f = frame_for(lo, hi);
  std::ostringstream out;
  open(out, title, ylabel, f);
  auto x = [&](std::size_t i) { return kLeft + (len > 1 ? f.plot_w() * i / double(len - 1) : f.plot_w() / 2); };
  out << "<text x=\"" << kLeft + f.plot_w() / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(xlabel) << "</text>\n";
  if (len > 0)
    out << "<text x=\"" << x(len - 1) << "\" y=\"" << kTop + f.plot_h() + 16 << "\" text-anchor=\"end\">"
        << len - 1 << "</text>\n<text x=\"" << kLeft << "\" y=\"" << kTop + f.plot_h() + 16 << "\">0</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].values.size(); ++i)
      out << num(x(i)) << ',' << num(f.y(series[s].values[i])) << ' ';
    out << "\"/>\n<text x=\"" << kWidth - kRight + 10 << "\" y=\"" << kTop + 16 + 18 * s << "\" fill=\"" << colour
        << "\">" << escape(series[s].name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// Box per group: quartiles, median line and min/max whiskers.
inline std::string box_plot(const std::string& title, const std::string& ylabel,
                            const std::vector<BoxGroup>& groups) {
  using namespace detail;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : groups)
    for (double v : g.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  const Frame f = frame_for(lo, hi);
  std::ostringstream out;
  open(out, title, ylabel, f);
  const double slot = groups.empty() ? 0.0 : f.plot_w() / groups.size();
  auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    return i + 1 < v.size() ? v[i] + (pos - i) * (v[i + 1] - v[i]) : v[i];
  };
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double cx = kLeft + slot * (g + 0.5);
    const double half = std::min(18.0, slot * 0.3);
    out << "<text transform=\"translate(" << num(cx) << ',' << kTop + f.plot_h() + 12
        << ") rotate(30)\" font-size=\"9\">" << escape(groups[g].name) << "</text>\n";
    if (groups[g].values.empty()) continue;
    const auto& v = groups[g].values;
    const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
    const double mn = *std::min_element(v.begin(), v.end()), mx = *std::max_element(v.begin(), v.end());
    const char* colour = kPalette[g % std::size(kPalette)];
    out << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(f.y(mx)) << "\" y2=\""
        << num(f.y(mn)) << "\" stroke=\"black\"/>\n"
        << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(f.y(q3)) << "\" width=\"" << num(2 * half)
        << "\" height=\"" << num(std::max(1.0, f.y(q1) - f.y(q3))) << "\" fill=\"" << colour
        << "\" fill-opacity=\"0.5\" stroke=\"black\"/>\n"
        << "<line x1=\"" << num(cx - half) << "\" x2=\"" << num(cx + half) << "\" y1=\"" << num(f.y(q2))
        << "\" y2=\"" << num(f.y(q2)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace fedora::svg
