#pragma once

#include "ldae/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ldae {

// Plot conventions:
//   scatter: x = neuron significance, linear from 0 to 1.05 * max; y = gamma, linear
//            over [0, 1]; fill colour runs blue (mean sign -1) through purple to red (+1).
//   cost vs alpha: x = log10(alpha) over the alpha > 0 points; y = validation cost,
//            linear, padded 5% around the data range. Rows with alpha = 0 (single
//            layer models) are drawn as dashed horizontal reference lines.

namespace svg {

inline constexpr double kWidth = 640, kHeight = 480, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

inline std::string colour_for_sign(double sign) {
    const double t = std::clamp((sign + 1.0) / 2.0, 0.0, 1.0);
    std::ostringstream os;
    os << "rgb(" << static_cast<int>(std::lround(255 * t)) << ",0," << static_cast<int>(std::lround(255 * (1 - t)))
       << ")";
    return os.str();
}

inline const char* palette(std::size_t i) {
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colours[i % 6];
}

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void header(std::ostream& out, const std::string& title) {
    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
        << "</text>\n";
}

inline void axes(std::ostream& out, const Frame& f, const std::string& xlabel, const std::string& ylabel,
                 bool log_x = false) {
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
        << kHeight - kBottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
        const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
        std::ostringstream xl;
        xl << std::setprecision(3) << (log_x ? std::pow(10.0, xv) : xv);
        std::ostringstream yl;
        yl << std::setprecision(4) << yv;
        out << "<text x=\"" << f.px(xv) << "\" y=\"" << kHeight - kBottom + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << xl.str() << "</text>\n";
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
            << yl.str() << "</text>\n";
    }
    out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 18
        << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
    out << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
        << "transform=\"rotate(-90 16 " << (kTop + kHeight - kBottom) / 2 << ")\">" << ylabel << "</text>\n";
}

}  // namespace svg

/// Gamma against significance, one dot per neuron.
inline void write_scatter_svg(std::ostream& out, const std::vector<double>& significance,
                              const std::vector<double>& gamma, const std::vector<double>& mean_sign,
                              const std::string& title) {
    double xmax = 0.0;
    for (double x : significance) xmax = std::max(xmax, x);
    const svg::Frame f{0.0, xmax > 0 ? 1.05 * xmax : 1.0, 0.0, 1.0};
    svg::header(out, title);
    svg::axes(out, f, "significance", "invariance (gamma)");
    for (std::size_t i = 0; i < significance.size() && i < gamma.size(); ++i) {
        if (std::isnan(gamma[i])) continue;
        const double sign = i < mean_sign.size() ? mean_sign[i] : 0.0;
        out << "<circle cx=\"" << f.px(significance[i]) << "\" cy=\"" << f.py(gamma[i]) << "\" r=\"3\" fill=\""
            << svg::colour_for_sign(sign) << "\" fill-opacity=\"0.7\"/>\n";
    }
    out << "</svg>\n";
}

struct CostSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (alpha, cost)
};

/// Validation cost against alpha, one polyline per series.
inline void write_cost_plot_svg(std::ostream& out, const std::vector<CostSeries>& series, const std::string& title) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [a, c] : s.points) {
            ymin = std::min(ymin, c);
            ymax = std::max(ymax, c);
            if (a > 0) {
                xmin = std::min(xmin, std::log10(a));
                xmax = std::max(xmax, std::log10(a));
            }
        }
    if (xmin > xmax) xmin = -1, xmax = 0;
    if (xmin == xmax) xmin -= 0.5, xmax += 0.5;
    if (ymin > ymax) ymin = 0, ymax = 1;
    const double pad = ymax > ymin ? 0.05 * (ymax - ymin) : 0.01;
    const svg::Frame f{xmin, xmax, ymin - pad, ymax + pad};
    svg::header(out, title);
    svg::axes(out, f, "alpha", "validation cost per element", true);
    for (std::size_t k = 0; k < series.size(); ++k) {
        auto pts = series[k].points;
        std::sort(pts.begin(), pts.end());
        std::ostringstream poly;
        for (const auto& [a, c] : pts) {
            if (a > 0) {
                poly << f.px(std::log10(a)) << ',' << f.py(c) << ' ';
                out << "<circle cx=\"" << f.px(std::log10(a)) << "\" cy=\"" << f.py(c) << "\" r=\"3\" fill=\""
                    << svg::palette(k) << "\"/>\n";
            } else {
                out << "<line x1=\"" << svg::kLeft << "\" y1=\"" << f.py(c) << "\" x2=\"" << svg::kWidth - svg::kRight
                    << "\" y2=\"" << f.py(c) << "\" stroke=\"" << svg::palette(k) << "\" stroke-dasharray=\"6,4\"/>\n";
            }
        }
        if (!poly.str().empty())
            out << "<polyline fill=\"none\" stroke=\"" << svg::palette(k) << "\" points=\"" << poly.str() << "\"/>\n";
        out << "<text x=\"" << svg::kWidth - svg::kRight - 100 << "\" y=\"" << svg::kTop + 16 * (k + 1)
            << "\" font-size=\"12\" fill=\"" << svg::palette(k) << "\">" << series[k].name << "</text>\n";
    }
    out << "</svg>\n";
}

/// Minimal CSV table: header names and string cells. Lines starting with '#' are comments.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw InputError("CSV has no column '" + name + "'");
    }
};

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    do {
        if (!std::getline(in, line)) throw InputError("empty CSV");
        if (!line.empty() && line.back() == '\r') line.pop_back();
    } while (line.empty() || line.front() == '#');
    t.header = split(line);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto cells = split(line);
        if (cells.size() != t.header.size()) throw InputError("CSV row has " + std::to_string(cells.size()) +
                                                              " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

}  // namespace ldae
