#include "lfk/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "lfk/errors.hpp"

namespace lfk {

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series, int width, int height) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) {
        ymax = ymin + 1;
        ymin -= 1;
    }
    const double pad_y = 0.05 * (ymax - ymin);
    ymin -= pad_y;
    ymax += pad_y;

    const int ml = 56, mr = 16, mt = 28, mb = 40;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

    std::ofstream out(path);
    if (!out) throw ConfigError("write_svg_chart: cannot open " + path);
    char buf[256];

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";

    // axes box and ticks
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + k * (xmax - xmin) / 4;
        const double yv = ymin + k * (ymax - ymin) / 4;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\" font-size=\"10\" "
                      "font-family=\"sans-serif\">%.3g</text>\n",
                      px(xv), height - mb + 14, xv);
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\" font-size=\"10\" "
                      "font-family=\"sans-serif\">%.3g</text>\n",
                      ml - 4, py(yv) + 3, yv);
        out << buf;
    }
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"14\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 14 "
        << mt + ph / 2 << ")\">" << y_label << "</text>\n";

    int legend_y = mt + 14;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(s.x[i]), py(s.y[i]));
            out << buf;
        }
        out << "\"/>\n";
        if (!s.label.empty()) {
            out << "<line x1=\"" << ml + 8 << "\" y1=\"" << legend_y << "\" x2=\"" << ml + 28
                << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
            out << "<text x=\"" << ml + 32 << "\" y=\"" << legend_y + 3
                << "\" font-size=\"10\" font-family=\"sans-serif\">" << s.label << "</text>\n";
            legend_y += 14;
        }
    }
    out << "</svg>\n";
}

}  // namespace lfk
