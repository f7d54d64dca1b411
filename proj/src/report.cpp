#include "groundcheck/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace groundcheck {
namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 30, kTop = 50, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& x_label, const std::string& y_label) {
  const double l = f.px(f.x0), r = f.px(f.x1), b = f.py(f.y0), t = f.py(f.y1);
  os << "<path d=\"M" << fmt(l) << ' ' << fmt(t) << " L" << fmt(l) << ' ' << fmt(b) << " L" << fmt(r) << ' '
     << fmt(b) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    os << "<text x=\"" << fmt(f.px(xv)) << "\" y=\"" << fmt(b + 18) << "\" text-anchor=\"middle\">" << fmt(xv)
       << "</text>\n";
    os << "<text x=\"" << fmt(l - 8) << "\" y=\"" << fmt(f.py(yv) + 4) << "\" text-anchor=\"end\">" << fmt(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << fmt((l + r) / 2) << "\" y=\"" << fmt(kHeight - 18) << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n";
  os << "<text transform=\"translate(18 " << fmt((t + b) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(y_label) << "</text>\n";
}

}  // namespace

std::string render_scatter_svg(const std::vector<ScatterPoint>& points, const IsotonicModel* iso,
                               const std::string& title) {
  std::ostringstream os;
  open_svg(os, title);
  const Frame f{0.0, 1.0, 0.0, 1.0};
  axes(os, f, "pooled reliability R", "CHAIR");
  for (const auto& p : points) {
    os << "<circle cx=\"" << fmt(f.px(std::clamp(p.reliability, 0.0, 1.0))) << "\" cy=\""
       << fmt(f.py(std::clamp(p.chair, 0.0, 1.0))) << "\" r=\"2\" fill=\"" << kPalette[0]
       << "\" fill-opacity=\"0.35\"/>\n";
  }
  if (iso) {
    os << "<polyline fill=\"none\" stroke=\"" << kPalette[1] << "\" stroke-width=\"2\" points=\"";
    for (int k = 0; k <= 200; ++k) {
      const double r = k / 200.0;
      os << (k ? " " : "") << fmt(f.px(r)) << ',' << fmt(f.py(std::clamp(iso->predict(1.0 - r), 0.0, 1.0)));
    }
    os << "\"/>\n";
    os << "<text x=\"" << fmt(kWidth - kRight) << "\" y=\"" << fmt(kTop) << "\" text-anchor=\"end\" fill=\""
       << kPalette[1] << "\">isotonic CHAIR = ISO(1 - R)</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_line_chart_svg(const std::vector<double>& x, const std::vector<LineSeries>& series,
                                  const std::string& x_label, const std::string& title) {
  std::ostringstream os;
  open_svg(os, title);
  double x0 = x.empty() ? 0.0 : *std::min_element(x.begin(), x.end());
  double x1 = x.empty() ? 1.0 : *std::max_element(x.begin(), x.end());
  if (x1 <= x0) x1 = x0 + 1.0;
  double y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (double v : s.y) {
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  if (y0 > y1) y0 = 0.0, y1 = 1.0;
  const double pad = std::max(0.05 * (y1 - y0), 1e-3);
  const Frame f{x0, x1, y0 - pad, y1 + pad};
  axes(os, f, x_label, "value");
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.y.size() && i < x.size(); ++i) {
      os << (i ? " " : "") << fmt(f.px(x[i])) << ',' << fmt(f.py(s.y[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.y.size() && i < x.size(); ++i) {
      os << "<circle cx=\"" << fmt(f.px(x[i])) << "\" cy=\"" << fmt(f.py(s.y[i])) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    }
    os << "<text x=\"" << fmt(kLeft + 10) << "\" y=\"" << fmt(kTop + 16 * k) << "\" fill=\"" << color << "\">"
       << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace groundcheck
