#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gradsurg/vec.hpp"

namespace gradsurg::bench {

// Minimal deterministic SVG emission. Layout is a pure function of the
// data, so replotting a trace gives byte-identical files.

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
}

inline const char* color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % 8];
}

struct Frame {
    double w = 640, h = 420;
    double left = 70, right = 20, top = 40, bottom = 50;
    double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
    bool log_x = false, log_y = false;

    double tx(double x) const {
        const double a = log_x ? std::log10(x) : x;
        const double lo = log_x ? std::log10(x_lo) : x_lo;
        const double hi = log_x ? std::log10(x_hi) : x_hi;
        return left + (a - lo) / (hi - lo) * (w - left - right);
    }
    double ty(double y) const {
        const double a = log_y ? std::log10(y) : y;
        const double lo = log_y ? std::log10(y_lo) : y_lo;
        const double hi = log_y ? std::log10(y_hi) : y_hi;
        return h - bottom - (a - lo) / (hi - lo) * (h - top - bottom);
    }
};

inline void fit_range(const std::vector<Series>& series, Frame& f) {
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const Series& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (f.log_x && !(s.x[i] > 0)) continue;
            if (f.log_y && !(s.y[i] > 0)) continue;
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    if (x_lo > x_hi) {
        x_lo = 0;
        x_hi = 1;
    }
    if (y_lo > y_hi) {
        y_lo = 0;
        y_hi = 1;
    }
    if (x_lo == x_hi) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if (y_lo == y_hi) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    if (!f.log_x) {
        const double pad = 0.03 * (x_hi - x_lo);
        x_lo -= pad;
        x_hi += pad;
    }
    if (!f.log_y) {
        const double pad = 0.05 * (y_hi - y_lo);
        y_lo -= pad;
        y_hi += pad;
    }
    f.x_lo = x_lo;
    f.x_hi = x_hi;
    f.y_lo = y_lo;
    f.y_hi = y_hi;
}

inline std::string header(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) +
           "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) +
           "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text(double x, double y, const std::string& s,
                        const std::string& anchor = "middle", int size = 12) {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\"" +
           " font-size=\"" + std::to_string(size) + "\" text-anchor=\"" + anchor +
           "\">" + s + "</text>\n";
}

inline std::string line(double x1, double y1, double x2, double y2,
                        const std::string& stroke, double width = 1.0,
                        const std::string& dash = "") {
    std::string out = "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" +
                      num(x2) + "\" y2=\"" + num(y2) + "\" stroke=\"" + stroke +
                      "\" stroke-width=\"" + num(width) + "\"";
    if (!dash.empty()) out += " stroke-dasharray=\"" + dash + "\"";
    return out + "/>\n";
}

inline std::vector<double> ticks(double lo, double hi, bool log_scale) {
    std::vector<double> t;
    if (log_scale) {
        const int e_lo = static_cast<int>(std::ceil(std::log10(lo) - 1e-9));
        const int e_hi = static_cast<int>(std::floor(std::log10(hi) + 1e-9));
        for (int e = e_lo; e <= e_hi; ++e) t.push_back(std::pow(10.0, e));
        if (t.empty()) t = {lo, hi};
        return t;
    }
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    const double first = std::ceil(lo / step) * step;
    for (double v = first; v <= hi + 1e-12 * span; v += step) t.push_back(v);
    return t;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
}

inline std::string axes(const Frame& f, const std::string& xlabel,
                        const std::string& ylabel) {
    std::string out;
    out += line(f.left, f.h - f.bottom, f.w - f.right, f.h - f.bottom, "#000000");
    out += line(f.left, f.top, f.left, f.h - f.bottom, "#000000");
    for (double v : ticks(f.x_lo, f.x_hi, f.log_x)) {
        const double x = f.tx(v);
        out += line(x, f.h - f.bottom, x, f.h - f.bottom + 4, "#000000");
        out += text(x, f.h - f.bottom + 18, tick_label(v));
    }
    for (double v : ticks(f.y_lo, f.y_hi, f.log_y)) {
        const double y = f.ty(v);
        out += line(f.left - 4, y, f.left, y, "#000000");
        out += text(f.left - 8, y + 4, tick_label(v), "end", 11);
    }
    out += text((f.left + f.w - f.right) / 2, f.h - 12, xlabel);
    out += "<g transform=\"translate(16," + num((f.top + f.h - f.bottom) / 2) +
           ") rotate(-90)\">" + text(0, 0, ylabel) + "</g>\n";
    return out;
}

inline std::string polyline(const Frame& f, const Series& s, const char* stroke) {
    std::string out = "<polyline fill=\"none\" stroke=\"";
    out += stroke;
    out += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (f.log_x && !(s.x[i] > 0)) continue;
        if (f.log_y && !(s.y[i] > 0)) continue;
        out += num(f.tx(s.x[i])) + "," + num(f.ty(s.y[i])) + " ";
    }
    out += "\"/>\n";
    return out;
}

inline std::string legend(const Frame& f, const std::vector<Series>& series) {
    std::string out;
    double y = f.top + 8;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double x = f.w - f.right - 150;
        out += line(x, y, x + 22, y, color(i), 2.0);
        out += text(x + 28, y + 4, series[i].label, "start", 11);
        y += 16;
    }
    return out;
}

}  // namespace svg

/// Multi-series line plot.
inline std::string line_plot_svg(const std::string& title,
                                 const std::string& xlabel,
                                 const std::string& ylabel,
                                 const std::vector<Series>& series,
                                 bool log_x = false, bool log_y = false) {
    svg::Frame f;
    f.log_x = log_x;
    f.log_y = log_y;
    svg::fit_range(series, f);
    std::string out = svg::header(f.w, f.h);
    out += svg::text(f.w / 2, 22, title, "middle", 14);
    out += svg::axes(f, xlabel, ylabel);
    for (std::size_t i = 0; i < series.size(); ++i)
        out += svg::polyline(f, series[i], svg::color(i));
    out += svg::legend(f, series);
    out += "</svg>\n";
    return out;
}

/// Scatter plot with one labeled point per entry.
inline std::string scatter_plot_svg(const std::string& title,
                                    const std::string& xlabel,
                                    const std::string& ylabel,
                                    const std::vector<Series>& points) {
    svg::Frame f;
    svg::fit_range(points, f);
    std::string out = svg::header(f.w, f.h);
    out += svg::text(f.w / 2, 22, title, "middle", 14);
    out += svg::axes(f, xlabel, ylabel);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points[i].x.size(); ++j) {
            out += "<circle cx=\"" + svg::num(f.tx(points[i].x[j])) + "\" cy=\"" +
                   svg::num(f.ty(points[i].y[j])) + "\" r=\"4\" fill=\"" +
                   svg::color(i) + "\"/>\n";
            out += svg::text(f.tx(points[i].x[j]) + 6, f.ty(points[i].y[j]) - 6,
                             points[i].label, "start", 10);
        }
    }
    out += "</svg>\n";
    return out;
}

/// Geometry of one surgery decision in the plane spanned by the two
/// gradients: the raw gradients, the surgered direction, and the
/// tolerance-cone boundary g_p . d = -eps, one panel per tolerance.
inline std::string cone_diagram_svg(const GradientPair& g,
                                    const std::vector<double>& epsilons,
                                    const std::vector<Vec>& directions) {
    const double panel_w = 320, panel_h = 340;
    const double w = panel_w * epsilons.size(), h = panel_h;
    std::string out = svg::header(w, h);

    // orthonormal basis of span(g_e, g_p)
    Vec u = g.p / g.p.norm();
    Vec rest = g.e - g.e.dot(u) * u;
    Vec v = rest.norm() > 1e-12 ? Vec(rest / rest.norm()) : Vec(u);
    auto coords = [&](const Vec& vec) {
        return std::pair<double, double>(vec.dot(v), vec.dot(u));
    };

    double scale_ref = std::max(g.e.norm(), g.p.norm());
    for (std::size_t p = 0; p < epsilons.size(); ++p) {
        const double cx = panel_w * p + panel_w / 2;
        const double cy = panel_h / 2 + 10;
        const double unit = 110.0 / scale_ref;
        auto px = [&](const std::pair<double, double>& c) {
            return std::pair<double, double>(cx + unit * c.first,
                                             cy - unit * c.second);
        };
        auto arrow = [&](const Vec& vec, const char* stroke,
                         const std::string& label) {
            auto [ex, ey] = px(coords(vec));
            std::string s = svg::line(cx, cy, ex, ey, stroke, 2.0);
            s += svg::text(ex + 6, ey, label, "start", 11);
            return s;
        };
        // cone boundary: the set g_p . d = -eps is a line orthogonal to u
        const double off = -epsilons[p] / g.p.norm();
        const double by = cy - unit * off;
        out += svg::line(cx - 140, by, cx + 140, by, "#e0a800", 1.5, "6,4");
        out += svg::text(cx + 120, by - 6, "tolerance boundary", "end", 10);

        out += arrow(g.e, svg::color(0), "g_e");
        out += arrow(g.p, svg::color(2), "g_p");
        out += arrow(directions[p], svg::color(1), "d*");
        char title[64];
        std::snprintf(title, sizeof title, "eps = %.3g", epsilons[p]);
        out += svg::text(cx, 24, title, "middle", 13);
    }
    out += "</svg>\n";
    return out;
}

}  // namespace gradsurg::bench
