#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wws::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  /// Draw as a zero-order-hold staircase instead of straight segments.
  bool steps = false;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Horizontal reference lines.
  std::vector<double> guides;
};

/// Static line plot; non-finite points are skipped.
std::string render(const Plot& plot, int width = 640, int height = 360);
void write(const std::filesystem::path& path, const Plot& plot);

}  // namespace wws::svg
