#include "wws/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "wws/error.hpp"

namespace wws::svg {
namespace {

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

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

}  // namespace

std::string render(const Plot& plot, int width, int height) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  for (double g : plot.guides) {
    y0 = std::min(y0, g);
    y1 = std::max(y1, g);
  }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 60, right = 20, top = 30, bottom = 45;
  const double pw = width - left - right, ph = height - top - bottom;
  const auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto sy = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0, xv = x0 + (x1 - x0) * i / 4.0;
    o << "<text x=\"" << left - 5 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
      << std::setprecision(1) << yv << std::setprecision(2) << "</text>\n";
    o << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << std::setprecision(0) << xv << std::setprecision(2) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << escape(plot.x_label) << "</text>\n";
  o << "<text x=\"14\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
    << top + ph / 2 << ")\">" << escape(plot.y_label) << "</text>\n";
  for (double g : plot.guides) {
    o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << sy(g) << "\" y2=\"" << sy(g)
      << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  std::size_t idx = 0;
  for (const auto& s : plot.series) {
    const char* color = kColors[idx % (sizeof(kColors) / sizeof(kColors[0]))];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool have_prev = false;
    double prev_y = 0.0;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (s.steps && have_prev) o << sx(s.x[i]) << ',' << sy(prev_y) << ' ';
      o << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
      have_prev = true;
      prev_y = s.y[i];
    }
    o << "\"/>\n";
    o << "<text x=\"" << left + 8 << "\" y=\"" << top + 14 + 14 * static_cast<double>(idx) << "\" font-size=\"11\" fill=\""
      << color << "\">" << escape(s.name) << "</text>\n";
    ++idx;
  }
  o << "</svg>\n";
  return o.str();
}

void write(const std::filesystem::path& path, const Plot& plot) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << render(plot);
}

}  // namespace wws::svg
