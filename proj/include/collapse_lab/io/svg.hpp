#pragma once

// Minimal line plots: one polyline per series on linear axes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <cstdio>

namespace collapse_lab::io {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    double width = 640;
    double height = 400;
};

inline std::string xml_escape(const std::string& s) {
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

inline std::string svg_plot(const PlotSpec& spec, const std::vector<Series>& series) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double ml = 60, mr = 20, mt = 30, mb = 45;
    const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.4g", v);
        return std::string(b);
    };

    std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(spec.width) + "\" height=\"" +
                    num(spec.height) + "\">\n";
    o += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + num(spec.width / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
         xml_escape(spec.title) + "</text>\n";
    o += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        o += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(mt + ph + 15) + "\" text-anchor=\"middle\" font-size=\"10\">" +
             num(fx) + "</text>\n";
        o += "<text x=\"" + num(ml - 5) + "\" y=\"" + num(py(fy) + 3) + "\" text-anchor=\"end\" font-size=\"10\">" +
             num(fy) + "</text>\n";
    }
    o += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(spec.height - 8) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + xml_escape(spec.x_label) + "</text>\n";
    o += "<text x=\"14\" y=\"" + num(mt + ph / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
         num(mt + ph / 2) + ")\">" + xml_escape(spec.y_label) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = palette[k % 6];
        std::string pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
        }
        o += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\" points=\"" + pts +
             "\"/>\n";
        o += "<text x=\"" + num(ml + pw - 5) + "\" y=\"" + num(mt + 15 + 14.0 * static_cast<double>(k)) +
             "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + colour + "\">" + xml_escape(s.label) + "</text>\n";
    }
    return o + "</svg>\n";
}

}  // namespace collapse_lab::io
