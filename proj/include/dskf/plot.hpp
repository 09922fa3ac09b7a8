#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dskf::plot {

struct Series {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    double width = 1.5;
    std::string label;
};

/// Shaded region between lo(x) and hi(x).
struct Band {
    std::vector<double> x, lo, hi;
    std::string color = "#1f77b4";
    double opacity = 0.25;
};

struct Figure {
    std::string title, xlabel, ylabel;
    std::vector<Band> bands;
    std::vector<Series> series;
    int width_px = 560;
    int height_px = 360;
};

/// Writes a static SVG line plot. Output is a pure function of the figure
/// contents (fixed number formatting), so identical data gives identical
/// bytes.
void write_svg(const Figure& figure, const std::filesystem::path& path);

}  // namespace dskf::plot
