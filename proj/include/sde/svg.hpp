#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace sde {

/// Minimal deterministic SVG builder: fixed two-decimal coordinates, no
/// timestamps or generated ids, so equal inputs give byte-equal files.
class SvgCanvas {
public:
    SvgCanvas(double width, double height);

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0);
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double stroke_width = 1.5);
    void rect(double x, double y, double w, double h, const std::string& fill);
    void text(double x, double y, const std::string& s, int font_size = 11,
              const std::string& anchor = "start");

    std::string str() const;

private:
    double width_;
    double height_;
    std::string body_;
};

/// Maps data points into a pixel viewport with simple linear axes.
struct PlotFrame {
    double px, py, pw, ph;          // pixel viewport
    double xmin, xmax, ymin, ymax;  // data range

    double x(double v) const { return px + (v - xmin) / (xmax - xmin) * pw; }
    double y(double v) const { return py + ph - (v - ymin) / (ymax - ymin) * ph; }
};

void draw_axes(SvgCanvas& svg, const PlotFrame& frame, const std::string& title);

}  // namespace sde
