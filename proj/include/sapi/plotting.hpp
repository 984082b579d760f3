#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sapi/dataset.hpp"
#include "sapi/simgen.hpp"

namespace sapi {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

// Software RGB canvas, origin top-left. All drawing clips to the bounds.
class Canvas {
public:
    Canvas(int width, int height, Rgb background);

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<std::uint8_t>& pixels() const { return pixels_; }

    void set(int x, int y, Rgb c);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb c);  // half-open
    void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1);
    void dashed_line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1,
                     double on_px = 6.0, double off_px = 4.0);
    void fill_polygon(const std::vector<Vec2>& points, Rgb c);
    // 5x7 uppercase bitmap font; (x, y) is the top-left corner of the text.
    void text(int x, int y, const std::string& s, Rgb c, int scale = 1);

private:
    int width_, height_;
    std::vector<std::uint8_t> pixels_;
};

int text_width(const std::string& s, int scale = 1);

// Minimal RGB8 PNG (stored-deflate stream, so byte output is fully
// deterministic and needs no compression library).
void write_png(const std::filesystem::path& path, const Canvas& canvas);

// One line on the per-step error chart.
struct CurveSeries {
    std::string label;
    std::vector<double> values;  // meters, one per prediction step
};

// Per-step displacement error for several models on one axes.
void plot_error_curves(const std::vector<CurveSeries>& series,
                       const std::filesystem::path& path);

// Bird's-eye overlay of one sample: lanes, surrounding vehicles, faded
// history, ground-truth future, model prediction, and a dashed linear-motion
// reference. `prediction` is the model output, n*2 ego-frame meters.
void plot_scenario_overlay(const Scenario& scenario, const Sample& sample,
                           const std::vector<double>& prediction,
                           const std::filesystem::path& path);

}  // namespace sapi
