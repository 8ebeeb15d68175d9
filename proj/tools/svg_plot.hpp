#pragma once
// Flat SVG line charts and heatmaps. Display only; CSV files carry the data.

#include <iosfwd>
#include <string>
#include <vector>

namespace scbf::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

void line_chart(std::ostream& os, const std::string& title, const std::string& xlabel,
                const std::string& ylabel, const std::vector<Series>& series,
                bool zero_line = false);

// values[i][j] drawn at column j, row i.
void heatmap(std::ostream& os, const std::string& title, const std::string& xlabel,
             const std::string& ylabel, const std::vector<double>& xs,
             const std::vector<double>& ys, const std::vector<std::vector<double>>& values);

}  // namespace scbf::plot
