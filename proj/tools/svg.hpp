#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace qlwave::cli::svg {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f77b4";
    bool markers = false;
    bool dashed = false;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

inline std::string render(const Plot& plot) {
    constexpr double W = 640, H = 440, L = 80, R = 160, T = 40, B = 60;
    auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0) && (!plot.log_y || y > 0);
    };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : plot.series)
        for (auto [x, y] : s.points) {
            if (!usable(x, y)) continue;
            x0 = std::min(x0, tx(x));
            x1 = std::max(x1, tx(x));
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.04 * (x1 - x0), pady = 0.06 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
    auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

    std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" font-family=\"sans-serif\" "
                    "font-size=\"12\">\n<rect width=\"640\" height=\"440\" fill=\"white\"/>\n";
    o += "<text x=\"" + num(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + escape(plot.title) +
         "</text>\n";
    o += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(W - L - R) + "\" height=\"" +
         num(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
        const double vx = plot.log_x ? std::pow(10.0, fx) : fx, vy = plot.log_y ? std::pow(10.0, fy) : fy;
        o += "<text x=\"" + num(px(vx)) + "\" y=\"" + num(H - B + 16) + "\" text-anchor=\"middle\">" + tick(vx) +
             "</text>\n";
        o += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(vy) + 4) + "\" text-anchor=\"end\">" + tick(vy) +
             "</text>\n";
    }
    o += "<text x=\"" + num(L + (W - L - R) / 2) + "\" y=\"" + num(H - 16) + "\" text-anchor=\"middle\">" +
         escape(plot.x_label) + "</text>\n";
    o += "<text x=\"16\" y=\"" + num(T + (H - T - B) / 2) + "\" transform=\"rotate(-90 16 " +
         num(T + (H - T - B) / 2) + ")\" text-anchor=\"middle\">" + escape(plot.y_label) + "</text>\n";
    int row = 0;
    for (const auto& s : plot.series) {
        std::string pts;
        for (auto [x, y] : s.points) {
            if (!usable(x, y)) continue;
            if (s.markers) {
                o += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
            } else {
                pts += num(px(x)) + "," + num(py(y)) + " ";
            }
        }
        if (!pts.empty()) {
            pts.pop_back();
            o += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" +
                 (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + " points=\"" + pts + "\"/>\n";
        }
        const double ly = T + 14 + 18 * row++;
        o += "<rect x=\"" + num(W - R + 12) + "\" y=\"" + num(ly - 9) + "\" width=\"12\" height=\"4\" fill=\"" +
             s.color + "\"/>\n";
        o += "<text x=\"" + num(W - R + 30) + "\" y=\"" + num(ly - 3) + "\">" + escape(s.label) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
}

}  // namespace qlwave::cli::svg
