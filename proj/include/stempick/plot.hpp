#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "stempick/core.hpp"
#include "stempick/csv.hpp"

namespace stempick {

// Minimal hand-rolled SVG line/bar charts; everything renders from CSV so the
// plotting backend stays replaceable.

struct Series {
  std::string label;
  std::vector<double> x, y;
};

namespace plotdetail {

constexpr int kWidth = 800, kHeight = 500;
constexpr int kMarginL = 70, kMarginR = 30, kMarginT = 50, kMarginB = 60;

struct Scale {
  double xmin, xmax, ymin, ymax;
  double px(double x) const {
    const double f = xmax > xmin ? (x - xmin) / (xmax - xmin) : 0.5;
    return kMarginL + f * (kWidth - kMarginL - kMarginR);
  }
  double py(double y) const {
    const double f = ymax > ymin ? (y - ymin) / (ymax - ymin) : 0.5;
    return kHeight - kMarginB - f * (kHeight - kMarginT - kMarginB);
  }
};

inline const char* palette(size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b"};
  return colors[i % 6];
}

inline void open_svg(std::ofstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"18\">"
     << title << "</text>\n";
}

inline void axes(std::ofstream& os, const Scale& s, const std::string& xlabel,
                 const std::string& ylabel) {
  os << "<line x1=\"" << kMarginL << "\" y1=\"" << kHeight - kMarginB << "\" x2=\""
     << kWidth - kMarginR << "\" y2=\"" << kHeight - kMarginB
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
     << "\" y2=\"" << kHeight - kMarginB << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = s.xmin + (s.xmax - s.xmin) * i / 5.0;
    const double yv = s.ymin + (s.ymax - s.ymin) * i / 5.0;
    os << "<text x=\"" << s.px(xv) << "\" y=\"" << kHeight - kMarginB + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_double(std::round(xv * 1000) / 1000) << "</text>\n";
    os << "<text x=\"" << kMarginL - 8 << "\" y=\"" << s.py(yv) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_double(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  os << "<text x=\"" << (kMarginL + kWidth - kMarginR) / 2 << "\" y=\""
     << kHeight - 15
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
     << xlabel << "</text>\n";
  os << "<text x=\"20\" y=\"" << (kMarginT + kHeight - kMarginB) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
        "transform=\"rotate(-90 20 "
     << (kMarginT + kHeight - kMarginB) / 2 << ")\">" << ylabel << "</text>\n";
}

}  // namespace plotdetail

// Per-seed curves plus a mean +/- one-standard-deviation band computed over
// the common prefix of the series. A single series collapses the band onto
// the line.
inline void svg_line_chart(const std::string& path, const std::string& title,
                           const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series) {
  using namespace plotdetail;
  if (series.empty()) throw ContractViolation("no series to plot");
  for (const auto& s : series)
    if (s.x.empty() || s.x.size() != s.y.size())
      throw ContractViolation("series must be non-empty with matching x/y");

  size_t common = series[0].x.size();
  for (const auto& s : series) common = std::min(common, s.x.size());
  std::vector<double> mean(common, 0.0), sd(common, 0.0);
  for (size_t k = 0; k < common; ++k) {
    for (const auto& s : series) mean[k] += s.y[k];
    mean[k] /= static_cast<double>(series.size());
    for (const auto& s : series) sd[k] += (s.y[k] - mean[k]) * (s.y[k] - mean[k]);
    sd[k] = std::sqrt(sd[k] / static_cast<double>(series.size()));
  }

  Scale sc{series[0].x[0], series[0].x[0], mean[0], mean[0]};
  for (const auto& s : series)
    for (size_t k = 0; k < s.x.size(); ++k) {
      sc.xmin = std::min(sc.xmin, s.x[k]);
      sc.xmax = std::max(sc.xmax, s.x[k]);
      sc.ymin = std::min(sc.ymin, s.y[k]);
      sc.ymax = std::max(sc.ymax, s.y[k]);
    }
  for (size_t k = 0; k < common; ++k) {
    sc.ymin = std::min(sc.ymin, mean[k] - sd[k]);
    sc.ymax = std::max(sc.ymax, mean[k] + sd[k]);
  }
  if (sc.ymax == sc.ymin) {
    sc.ymin -= 1.0;
    sc.ymax += 1.0;
  }

  std::ofstream os(path);
  if (!os) throw ContractViolation("cannot open plot output: " + path);
  open_svg(os, title);
  axes(os, sc, xlabel, ylabel);

  // band polygon over the common prefix
  os << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
  for (size_t k = 0; k < common; ++k)
    os << sc.px(series[0].x[k]) << ',' << sc.py(mean[k] + sd[k]) << ' ';
  for (size_t k = common; k-- > 0;)
    os << sc.px(series[0].x[k]) << ',' << sc.py(mean[k] - sd[k]) << ' ';
  os << "\"/>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    os << "<polyline fill=\"none\" stroke=\"" << palette(si)
       << "\" stroke-width=\"1\" stroke-opacity=\"0.6\" points=\"";
    for (size_t k = 0; k < series[si].x.size(); ++k)
      os << sc.px(series[si].x[k]) << ',' << sc.py(series[si].y[k]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << kWidth - kMarginR - 150 << "\" y=\""
       << kMarginT + 16 * static_cast<int>(si) << "\" font-family=\"sans-serif\" "
          "font-size=\"12\" fill=\""
       << palette(si) << "\">" << series[si].label << "</text>\n";
  }
  // mean line on top
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2.5\" points=\"";
  for (size_t k = 0; k < common; ++k)
    os << sc.px(series[0].x[k]) << ',' << sc.py(mean[k]) << ' ';
  os << "\"/>\n</svg>\n";
  if (!os) throw ContractViolation("plot write failed: " + path);
}

inline void svg_bar_chart(const std::string& path, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  using namespace plotdetail;
  if (labels.empty() || labels.size() != values.size())
    throw ContractViolation("bar chart needs matching labels and values");
  Scale sc{0.0, static_cast<double>(labels.size()), 0.0, 1.0};
  const double vmax = *std::max_element(values.begin(), values.end());
  if (vmax > 1.0) sc.ymax = vmax;

  std::ofstream os(path);
  if (!os) throw ContractViolation("cannot open plot output: " + path);
  open_svg(os, title);
  os << "<line x1=\"" << kMarginL << "\" y1=\"" << kHeight - kMarginB << "\" x2=\""
     << kWidth - kMarginR << "\" y2=\"" << kHeight - kMarginB
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
     << "\" y2=\"" << kHeight - kMarginB << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double yv = sc.ymin + (sc.ymax - sc.ymin) * i / 5.0;
    os << "<text x=\"" << kMarginL - 8 << "\" y=\"" << sc.py(yv) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_double(std::round(yv * 100) / 100) << "</text>\n";
  }
  const double slot = (kWidth - kMarginL - kMarginR) / static_cast<double>(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    const double x0 = kMarginL + slot * static_cast<double>(i) + slot * 0.15;
    const double w = slot * 0.7;
    const double ytop = sc.py(values[i]);
    os << "<rect x=\"" << x0 << "\" y=\"" << ytop << "\" width=\"" << w
       << "\" height=\"" << (kHeight - kMarginB) - ytop
       << "\" fill=\"#d62728\" fill-opacity=\"0.85\"/>\n";
    os << "<text x=\"" << x0 + w / 2 << "\" y=\"" << kHeight - kMarginB + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << labels[i] << "</text>\n";
    os << "<text x=\"" << x0 + w / 2 << "\" y=\"" << ytop - 6
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_double(std::round(values[i] * 1000) / 1000) << "</text>\n";
  }
  os << "<text x=\"" << (kMarginL + kWidth - kMarginR) / 2 << "\" y=\""
     << kHeight - 15
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
     << xlabel << "</text>\n";
  os << "<text x=\"20\" y=\"" << (kMarginT + kHeight - kMarginB) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
        "transform=\"rotate(-90 20 "
     << (kMarginT + kHeight - kMarginB) / 2 << ")\">" << ylabel << "</text>\n";
  os << "</svg>\n";
  if (!os) throw ContractViolation("plot write failed: " + path);
}

}  // namespace stempick
