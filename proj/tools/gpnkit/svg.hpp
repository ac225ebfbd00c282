#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace gpnkit::cli {

// A tiny line-plot writer: one or more panels side by side, each with axes,
// ticks, filled bands, polylines and point markers.

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

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    return colors[i % 7];
}

struct Series {
    std::vector<double> x, y;
    std::string label, color = "#1f77b4";
    bool dashed = false;
    bool markers = false;
    bool line = true;
};

struct Band {
    std::vector<double> x, lo, hi;
    std::string color = "#1f77b4";
};

struct Panel {
    std::string title, xlabel, ylabel;
    std::vector<Band> bands;
    std::vector<Series> series;
    std::optional<std::pair<double, double>> xlim, ylim;
};

namespace detail {

inline std::pair<double, double> nice_range(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
    if (hi - lo < 1e-12) return {lo - 0.5, hi + 0.5};
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

inline std::vector<double> ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace detail

inline std::string render_svg(const std::vector<Panel>& panels) {
    const double pw = 420, ph = 320, ml = 60, mr = 15, mt = 30, mb = 45;
    const double width = pw * static_cast<double>(panels.size());
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(ph) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& panel = panels[p];
        double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
        auto extend = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
            for (double v : xs)
                if (std::isfinite(v)) x0 = std::min(x0, v), x1 = std::max(x1, v);
            for (double v : ys)
                if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
        };
        for (const auto& b : panel.bands) extend(b.x, b.lo), extend(b.x, b.hi);
        for (const auto& sr : panel.series) extend(sr.x, sr.y);
        auto [xa, xb] = panel.xlim.value_or(detail::nice_range(x0, x1));
        auto [ya, yb] = panel.ylim.value_or(detail::nice_range(y0, y1));
        const double left = static_cast<double>(p) * pw + ml, right = static_cast<double>(p + 1) * pw - mr;
        const double top = mt, bottom = ph - mb;
        auto px = [&](double v) { return left + (v - xa) / (xb - xa) * (right - left); };
        auto py = [&](double v) { return bottom - (v - ya) / (yb - ya) * (bottom - top); };

        s += "<g>\n<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(right - left) + "\" height=\"" +
             num(bottom - top) + "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (double t : detail::ticks(xa, xb))
            s += "<line x1=\"" + num(px(t)) + "\" x2=\"" + num(px(t)) + "\" y1=\"" + num(bottom) + "\" y2=\"" + num(bottom + 4) +
                 "\" stroke=\"#444\"/><text x=\"" + num(px(t)) + "\" y=\"" + num(bottom + 16) + "\" text-anchor=\"middle\">" +
                 detail::fmt_tick(t) + "</text>\n";
        for (double t : detail::ticks(ya, yb))
            s += "<line x1=\"" + num(left - 4) + "\" x2=\"" + num(left) + "\" y1=\"" + num(py(t)) + "\" y2=\"" + num(py(t)) +
                 "\" stroke=\"#444\"/><text x=\"" + num(left - 6) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" +
                 detail::fmt_tick(t) + "</text>\n";
        s += "<text x=\"" + num(0.5 * (left + right)) + "\" y=\"" + num(top - 10) + "\" text-anchor=\"middle\" font-size=\"13\">" +
             xml_escape(panel.title) + "</text>\n";
        s += "<text x=\"" + num(0.5 * (left + right)) + "\" y=\"" + num(ph - 8) + "\" text-anchor=\"middle\">" +
             xml_escape(panel.xlabel) + "</text>\n";
        s += "<text transform=\"translate(" + num(left - 42) + "," + num(0.5 * (top + bottom)) +
             ") rotate(-90)\" text-anchor=\"middle\">" + xml_escape(panel.ylabel) + "</text>\n";

        for (const auto& b : panel.bands) {
            std::string pts;
            for (std::size_t i = 0; i < b.x.size(); ++i) pts += num(px(b.x[i])) + "," + num(py(b.hi[i])) + " ";
            for (std::size_t i = b.x.size(); i-- > 0;) pts += num(px(b.x[i])) + "," + num(py(b.lo[i])) + " ";
            s += "<polygon points=\"" + pts + "\" fill=\"" + b.color + "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
        }
        double legend_y = top + 14;
        for (const auto& sr : panel.series) {
            if (sr.line && sr.x.size() > 1) {
                std::string pts;
                for (std::size_t i = 0; i < sr.x.size(); ++i) pts += num(px(sr.x[i])) + "," + num(py(sr.y[i])) + " ";
                s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + sr.color + "\" stroke-width=\"1.6\"" +
                     (sr.dashed ? " stroke-dasharray=\"5,4\"" : "") + "/>\n";
            }
            if (sr.markers || !sr.line || sr.x.size() == 1)
                for (std::size_t i = 0; i < sr.x.size(); ++i)
                    s += "<circle cx=\"" + num(px(sr.x[i])) + "\" cy=\"" + num(py(sr.y[i])) + "\" r=\"3\" fill=\"" + sr.color + "\"/>\n";
            if (!sr.label.empty()) {
                if (sr.line)
                    s += "<line x1=\"" + num(right - 120) + "\" x2=\"" + num(right - 100) + "\" y1=\"" + num(legend_y - 4) +
                         "\" y2=\"" + num(legend_y - 4) + "\" stroke=\"" + sr.color + "\" stroke-width=\"2\"" +
                         (sr.dashed ? " stroke-dasharray=\"5,4\"" : "") + "/>";
                else
                    s += "<circle cx=\"" + num(right - 110) + "\" cy=\"" + num(legend_y - 4) + "\" r=\"3\" fill=\"" + sr.color + "\"/>";
                s += "<text x=\"" + num(right - 95) + "\" y=\"" + num(legend_y) + "\">" + xml_escape(sr.label) + "</text>\n";
                legend_y += 14;
            }
        }
        s += "</g>\n";
    }
    return s + "</svg>\n";
}

}  // namespace gpnkit::cli
