/**
 * @file plot.hpp
 * @brief Plot-data tables and a small self-contained SVG line chart.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include "splinefm/schema.hpp"

namespace splinefm::plot {

/// Tab-separated table with a header row. Numbers use shortest round-trip form.
class TsvTable {
public:
    explicit TsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    TsvTable& add_row(std::vector<std::string> cells) {
        if (cells.size() != columns_.size()) {
            throw Error("table row has " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(columns_.size()));
        }
        rows_.push_back(std::move(cells));
        return *this;
    }

    void write(std::ostream& out) const {
        write_line(out, columns_);
        for (const auto& r : rows_) {
            write_line(out, r);
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }

private:
    static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << (i ? "\t" : "") << cells[i];
        }
        out << '\n';
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string cell(double v) { return format_number(v); }
inline std::string cell(std::size_t v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
    bool markers = false;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    double width = 640;
    double height = 400;
};

namespace detail {

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fixed(double v, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// Tick label with just enough digits for the axis span.
inline std::string tick(double v, double span) {
    const int decimals = span > 0.0 ? std::clamp(2 - static_cast<int>(std::floor(std::log10(span))), 0, 8) : 2;
    return fixed(v, decimals);
}

}  // namespace detail

/// Line chart with axes, five ticks per axis and a legend.
inline void write_svg(std::ostream& out, const std::vector<Series>& series, const ChartOptions& opt) {
    static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                x0 = std::min(x0, s.x[i]);
                x1 = std::max(x1, s.x[i]);
                y0 = std::min(y0, s.y[i]);
                y1 = std::max(y1, s.y[i]);
            }
        }
    }
    if (!std::isfinite(x0)) {
        x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    const double left = 70, right = 170, top = 40, bottom = 50;
    const double pw = opt.width - left - right;
    const double ph = opt.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
    using detail::fixed;

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(opt.width, 0) << "\" height=\""
        << fixed(opt.height, 0) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << detail::escape_xml(opt.title) << "</text>\n";
    out << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(pw) << "\" height=\""
        << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4.0;
        const double yv = y0 + (y1 - y0) * t / 4.0;
        out << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << fixed(top + ph + 16)
            << "\" text-anchor=\"middle\">" << detail::tick(xv, x1 - x0) << "</text>\n";
        out << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(yv) + 4) << "\" text-anchor=\"end\">"
            << detail::tick(yv, y1 - y0) << "</text>\n";
        out << "<line x1=\"" << fixed(left) << "\" x2=\"" << fixed(left + pw) << "\" y1=\"" << fixed(py(yv))
            << "\" y2=\"" << fixed(py(yv)) << "\" stroke=\"#ddd\"/>\n";
    }
    out << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(opt.height - 10)
        << "\" text-anchor=\"middle\">" << detail::escape_xml(opt.x_label) << "</text>\n";
    out << "<text transform=\"translate(16," << fixed(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << detail::escape_xml(opt.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
            << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                out << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i])) << ' ';
            }
        }
        out << "\"/>\n";
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                    out << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i]))
                        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
                }
            }
        }
        const double ly = top + 14.0 * static_cast<double>(k) + 8;
        out << "<line x1=\"" << fixed(left + pw + 10) << "\" x2=\"" << fixed(left + pw + 30) << "\" y1=\""
            << fixed(ly) << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
            << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
        out << "<text x=\"" << fixed(left + pw + 35) << "\" y=\"" << fixed(ly + 4) << "\">"
            << detail::escape_xml(s.label) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace splinefm::plot
