#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace csr {

// Minimal deterministic SVG 1.1 line charts. Fixed canvas, fixed palette,
// coordinates rounded to 0.01 so output bytes are reproducible.
struct SvgSeries {
    std::string name;
    std::vector<double> x, y;
};

class SvgChart {
public:
    SvgChart(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add(SvgSeries s) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("svg: x/y size mismatch");
        series_.push_back(std::move(s));
    }

    void write(const std::string& path) const {
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& s : series_)
            for (size_t i = 0; i < s.x.size(); ++i) {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        if (!(xmin <= xmax)) { xmin = 0; xmax = 1; }
        if (!(ymin <= ymax)) { ymin = 0; ymax = 1; }
        if (xmax == xmin) { xmax = xmin + 1; }
        if (ymax == ymin) { ymax = ymin + 1; }

        const double W = 640, H = 420, L = 70, R = 160, T = 40, B = 50;
        auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
        auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
        auto f = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", v);
            return std::string(buf);
        };
        auto g = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4g", v);
            return std::string(buf);
        };

        static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                        "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W
            << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
            << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
            << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
            << " font-size=\"16\">" << escape(title_) << "</text>\n";

        // axes + ticks
        out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\""
            << H - B << "\" stroke=\"black\"/>\n"
            << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
            << "\" stroke=\"black\"/>\n";
        for (int i = 0; i <= 5; ++i) {
            double xv = xmin + (xmax - xmin) * i / 5.0, yv = ymin + (ymax - ymin) * i / 5.0;
            out << "<line x1=\"" << f(px(xv)) << "\" y1=\"" << H - B << "\" x2=\"" << f(px(xv))
                << "\" y2=\"" << H - B + 5 << "\" stroke=\"black\"/>\n"
                << "<text x=\"" << f(px(xv)) << "\" y=\"" << H - B + 20
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << g(xv)
                << "</text>\n"
                << "<line x1=\"" << L - 5 << "\" y1=\"" << f(py(yv)) << "\" x2=\"" << L
                << "\" y2=\"" << f(py(yv)) << "\" stroke=\"black\"/>\n"
                << "<text x=\"" << L - 8 << "\" y=\"" << f(py(yv) + 4)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << g(yv)
                << "</text>\n";
        }
        out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
            << escape(x_label_) << "</text>\n"
            << "<text x=\"18\" y=\"" << (T + H - B) / 2
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
            << " transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">" << escape(y_label_)
            << "</text>\n";

        for (size_t si = 0; si < series_.size(); ++si) {
            const auto& s = series_[si];
            const char* color = palette[si % 8];
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
            for (size_t i = 0; i < s.x.size(); ++i) {
                if (i) out << ' ';
                out << f(px(s.x[i])) << ',' << f(py(s.y[i]));
            }
            out << "\"/>\n";
            double ly = T + 16 + 18.0 * double(si);
            out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << f(ly - 4) << "\" x2=\""
                << W - R + 34 << "\" y2=\"" << f(ly - 4) << "\" stroke=\"" << color
                << "\" stroke-width=\"2\"/>\n"
                << "<text x=\"" << W - R + 40 << "\" y=\"" << f(ly)
                << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.name)
                << "</text>\n";
        }
        out << "</svg>\n";
    }

private:
    static std::string escape(const std::string& s) {
        std::string r;
        for (char c : s) {
            if (c == '&') r += "&amp;";
            else if (c == '<') r += "&lt;";
            else if (c == '>') r += "&gt;";
            else r += c;
        }
        return r;
    }

    std::string title_, x_label_, y_label_;
    std::vector<SvgSeries> series_;
};

}  // namespace csr
