#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cournot::detail {

struct Series {
  std::string label;
  std::vector<double> values;
};

// Static SVG line chart of several series against a shared time axis.
void write_line_plot(const std::filesystem::path& path, const std::string& title, const std::vector<double>& times,
                     const std::vector<Series>& series);

}  // namespace cournot::detail
