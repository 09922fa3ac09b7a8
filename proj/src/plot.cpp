#include "dskf/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dskf/errors.hpp"

namespace dskf::plot {

namespace {

struct Limits {
    double x_min = std::numeric_limits<double>::infinity();
    double x_max = -std::numeric_limits<double>::infinity();
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -std::numeric_limits<double>::infinity();

    void take(double x, double y) {
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

void write_svg(const Figure& figure, const std::filesystem::path& path) {
    Limits lim;
    for (const Series& s : figure.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) lim.take(s.x[i], s.y[i]);
    }
    for (const Band& b : figure.bands) {
        for (std::size_t i = 0; i < b.x.size(); ++i) {
            lim.take(b.x[i], b.lo[i]);
            lim.take(b.x[i], b.hi[i]);
        }
    }
    if (!std::isfinite(lim.x_min) || !std::isfinite(lim.y_min)) {
        throw ConfigError("plot has no data");
    }
    if (lim.x_max == lim.x_min) lim.x_max = lim.x_min + 1.0;
    if (lim.y_max == lim.y_min) lim.y_max = lim.y_min + 1.0;
    // Headroom so curves do not sit on the frame.
    const double y_pad = 0.05 * (lim.y_max - lim.y_min);
    lim.y_min -= y_pad;
    lim.y_max += y_pad;

    const double ml = 56, mr = 16, mt = 28, mb = 42;
    const double pw = figure.width_px - ml - mr;
    const double ph = figure.height_px - mt - mb;
    auto px = [&](double x) { return ml + pw * (x - lim.x_min) / (lim.x_max - lim.x_min); };
    auto py = [&](double y) { return mt + ph * (1.0 - (y - lim.y_min) / (lim.y_max - lim.y_min)); };

    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << figure.width_px
        << "\" height=\"" << figure.height_px << "\" viewBox=\"0 0 " << figure.width_px << " "
        << figure.height_px << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (const Band& b : figure.bands) {
        if (b.x.empty()) continue;
        out << "<path fill=\"" << b.color << "\" fill-opacity=\"" << fmt(b.opacity)
            << "\" stroke=\"none\" d=\"M";
        for (std::size_t i = 0; i < b.x.size(); ++i) {
            out << fmt(px(b.x[i])) << " " << fmt(py(b.hi[i])) << (i + 1 < b.x.size() ? " L" : " ");
        }
        for (std::size_t i = b.x.size(); i-- > 0;) {
            out << "L" << fmt(px(b.x[i])) << " " << fmt(py(b.lo[i])) << " ";
        }
        out << "Z\"/>\n";
    }

    for (const Series& s : figure.series) {
        if (s.x.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\""
            << fmt(s.width) << "\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << (i + 1 < s.x.size() ? " " : "");
        }
        out << "\"/>\n";
    }

    // Frame and tick labels (4 ticks per axis).
    out << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw)
        << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = lim.x_min + (lim.x_max - lim.x_min) * k / 4.0;
        const double yv = lim.y_min + (lim.y_max - lim.y_min) * k / 4.0;
        out << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(mt + ph + 16)
            << "\" font-size=\"10\" text-anchor=\"middle\" fill=\"#333\">" << fmt(xv)
            << "</text>\n";
        out << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(py(yv) + 3)
            << "\" font-size=\"10\" text-anchor=\"end\" fill=\"#333\">" << fmt(yv) << "</text>\n";
    }

    out << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"16\" font-size=\"12\" "
        << "text-anchor=\"middle\" fill=\"#111\">" << figure.title << "</text>\n";
    out << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(mt + ph + 32)
        << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#111\">" << figure.xlabel
        << "</text>\n";
    out << "<text x=\"14\" y=\"" << fmt(mt + ph / 2) << "\" font-size=\"11\" "
        << "text-anchor=\"middle\" fill=\"#111\" transform=\"rotate(-90 14 " << fmt(mt + ph / 2)
        << ")\">" << figure.ylabel << "</text>\n";

    // Legend, top-right inside the frame.
    double ly = mt + 14;
    for (const Series& s : figure.series) {
        if (s.label.empty()) continue;
        out << "<line x1=\"" << fmt(ml + pw - 120) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
            << fmt(ml + pw - 100) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << s.color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << fmt(ml + pw - 94) << "\" y=\"" << fmt(ly)
            << "\" font-size=\"10\" fill=\"#111\">" << s.label << "</text>\n";
        ly += 14;
    }

    out << "</svg>\n";
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

}  // namespace dskf::plot
