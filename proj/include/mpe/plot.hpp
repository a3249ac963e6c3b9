#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mpe {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // non-finite y values are dropped
};

// Line chart as a standalone SVG document.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

void write_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series);

}  // namespace mpe
