#pragma once

#include <string>
#include <vector>

namespace lfk {

struct SvgSeries {
    std::string label;
    std::string color;  // css color
    std::vector<double> x, y;
};

/// Minimal line chart writer (axes, labels, legend).
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series, int width = 640, int height = 360);

}  // namespace lfk
