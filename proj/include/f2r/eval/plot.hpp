#pragma once

#include <string>
#include <vector>

#include "f2r/core/tensor.hpp"

namespace f2r {

struct PlotSeries {
    std::string label;
    std::vector<double> values;
};

// Minimal chart rasterizer for the ablation reports; bars with value
// labels and simple per-frame line charts, written as PNG.
void render_bar_chart(const std::string& path, const std::string& title,
                      const std::vector<std::string>& labels, const std::vector<double>& values,
                      int width = 720, int height = 420);

void render_line_chart(const std::string& path, const std::string& title,
                       const std::vector<PlotSeries>& series, int width = 720, int height = 420);

}  // namespace f2r
