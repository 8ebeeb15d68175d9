#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace scbf::plot {
namespace {

constexpr double kW = 720, kH = 420, kL = 70, kR = 150, kT = 40, kB = 50;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

void header(std::ostream& os, const std::string& title, const std::string& xlabel,
            const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
     << "</text>\n"
     << "<text x=\"" << kL + (kW - kL - kR) / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\">" << xlabel << "</text>\n"
     << "<text transform=\"translate(16," << kT + (kH - kT - kB) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
}

}  // namespace

void line_chart(std::ostream& os, const std::string& title, const std::string& xlabel,
                const std::string& ylabel, const std::vector<Series>& series, bool zero_line) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) {
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
  }
  if (zero_line) y0 = std::min(y0, 0.0), y1 = std::max(y1, 0.0);
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kT + (y1 - y) / (y1 - y0) * ph; };

  header(os, title, xlabel, ylabel);
  os << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << kT + ph + 16 << "\" text-anchor=\"middle\">"
       << fmt(xv) << "</text>\n"
       << "<text x=\"" << kL - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
       << fmt(yv) << "</text>\n";
  }
  if (zero_line) {
    os << "<line x1=\"" << kL << "\" x2=\"" << kL + pw << "\" y1=\"" << py(0) << "\" y2=\""
       << py(0) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % 6];
    // Thin long series so files stay small.
    const std::size_t stride = std::max<std::size_t>(1, s.x.size() / 2000);
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); k += stride) {
      if (std::isfinite(s.y[k])) os << fmt(px(s.x[k])) << ',' << fmt(py(s.y[k])) << ' ';
    }
    os << "\"/>\n"
       << "<text x=\"" << kL + pw + 12 << "\" y=\"" << kT + 16 + 18.0 * static_cast<double>(i)
       << "\" fill=\"" << color << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
}

void heatmap(std::ostream& os, const std::string& title, const std::string& xlabel,
             const std::string& ylabel, const std::vector<double>& xs,
             const std::vector<double>& ys, const std::vector<std::vector<double>>& values) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : values) {
    for (double v : row) {
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  const double cw = pw / static_cast<double>(std::max<std::size_t>(xs.size(), 1));
  const double ch = ph / static_cast<double>(std::max<std::size_t>(ys.size(), 1));
  header(os, title, xlabel, ylabel);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const double v = values[i][j];
      const double f = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const int r = static_cast<int>(255 * (1.0 - f)), b = static_cast<int>(255 * f);
      const double x = kL + cw * static_cast<double>(j);
      const double y = kT + ph - ch * static_cast<double>(i + 1);
      const std::string fill = std::isfinite(v) ? "rgb(" + std::to_string(r) + ",80," +
                                                      std::to_string(b) + ")"
                                                : std::string("#999");
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch
         << "\" fill=\"" << fill << "\"/>\n"
         << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4
         << "\" text-anchor=\"middle\" fill=\"white\">" << fmt(v) << "</text>\n";
    }
  }
  for (std::size_t j = 0; j < xs.size(); ++j) {
    os << "<text x=\"" << kL + cw * (static_cast<double>(j) + 0.5) << "\" y=\"" << kT + ph + 16
       << "\" text-anchor=\"middle\">" << fmt(xs[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < ys.size(); ++i) {
    os << "<text x=\"" << kL - 6 << "\" y=\"" << kT + ph - ch * (static_cast<double>(i) + 0.5) + 4
       << "\" text-anchor=\"end\">" << fmt(ys[i]) << "</text>\n";
  }
  os << "<text x=\"" << kL + pw + 12 << "\" y=\"" << kT + 16 << "\">min " << fmt(lo)
     << "</text>\n<text x=\"" << kL + pw + 12 << "\" y=\"" << kT + 34 << "\">max " << fmt(hi)
     << "</text>\n</svg>\n";
}

}  // namespace scbf::plot
