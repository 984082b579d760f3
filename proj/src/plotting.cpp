#include "sapi/plotting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sapi/raster.hpp"
#include "sapi/train_eval.hpp"

namespace sapi {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used.
struct Glyph {
    char ch;
    std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'%', {0x19, 0x1A, 0x02, 0x04, 0x08, 0x0B, 0x13}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
};

const std::uint8_t* glyph_rows(char ch) {
    char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    for (const Glyph& g : kFont)
        if (g.ch == up) return g.rows;
    return kFont[0].rows;  // unknown characters render as a space
}

}  // namespace

Canvas::Canvas(int width, int height, Rgb background) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ConfigError("canvas dims must be positive");
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = background.r;
        pixels_[i + 1] = background.g;
        pixels_[i + 2] = background.b;
    }
}

void Canvas::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = std::max(0, y0); y < std::min(height_, y1); ++y)
        for (int x = std::max(0, x0); x < std::min(width_, x1); ++x) set(x, y, c);
}

namespace {

void stamp(Canvas& canvas, int cx, int cy, int thickness, Rgb c) {
    int start = -(thickness - 1) / 2;
    for (int a = 0; a < thickness; ++a)
        for (int b = 0; b < thickness; ++b) canvas.set(cx + start + a, cy + start + b, c);
}

}  // namespace

void Canvas::line(double x0, double y0, double x1, double y1, Rgb c, int thickness) {
    double length = std::hypot(x1 - x0, y1 - y0);
    int steps = std::max(1, static_cast<int>(std::ceil(length * 2.0)));
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        stamp(*this, static_cast<int>(std::lround(x0 + t * (x1 - x0))),
              static_cast<int>(std::lround(y0 + t * (y1 - y0))), thickness, c);
    }
}

void Canvas::dashed_line(double x0, double y0, double x1, double y1, Rgb c, int thickness,
                         double on_px, double off_px) {
    double length = std::hypot(x1 - x0, y1 - y0);
    int steps = std::max(1, static_cast<int>(std::ceil(length * 2.0)));
    double period = on_px + off_px;
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        if (std::fmod(t * length, period) >= on_px) continue;
        stamp(*this, static_cast<int>(std::lround(x0 + t * (x1 - x0))),
              static_cast<int>(std::lround(y0 + t * (y1 - y0))), thickness, c);
    }
}

void Canvas::fill_polygon(const std::vector<Vec2>& points, Rgb c) {
    if (points.size() < 3) return;
    double ymin = points[0].y, ymax = points[0].y;
    for (const Vec2& p : points) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    int row_lo = std::max(0, static_cast<int>(std::floor(ymin)));
    int row_hi = std::min(height_ - 1, static_cast<int>(std::ceil(ymax)));
    std::vector<double> crossings;
    for (int row = row_lo; row <= row_hi; ++row) {
        double yc = row + 0.5;
        crossings.clear();
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Vec2& a = points[i];
            const Vec2& b = points[(i + 1) % points.size()];
            if ((a.y <= yc) == (b.y <= yc)) continue;
            crossings.push_back(a.x + (yc - a.y) / (b.y - a.y) * (b.x - a.x));
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
            int x0 = static_cast<int>(std::ceil(crossings[i] - 0.5));
            int x1 = static_cast<int>(std::ceil(crossings[i + 1] - 0.5));
            for (int x = std::max(0, x0); x < std::min(width_, x1); ++x) set(x, row, c);
        }
    }
}

void Canvas::text(int x, int y, const std::string& s, Rgb c, int scale) {
    int cursor = x;
    for (char ch : s) {
        const std::uint8_t* rows = glyph_rows(ch);
        for (int row = 0; row < 7; ++row)
            for (int col = 0; col < 5; ++col) {
                if (!(rows[row] & (1 << (4 - col)))) continue;
                for (int a = 0; a < scale; ++a)
                    for (int b = 0; b < scale; ++b)
                        set(cursor + col * scale + a, y + row * scale + b, c);
            }
        cursor += 6 * scale;
    }
}

int text_width(const std::string& s, int scale) {
    return s.empty() ? 0 : static_cast<int>(s.size()) * 6 * scale - scale;
}

// ---------------------------------------------------------------------------
// PNG encoding
// ---------------------------------------------------------------------------

namespace {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len, std::uint32_t crc) {
    static std::uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        ready = true;
    }
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc;
}

std::uint32_t adler32_of(const std::uint8_t* data, std::size_t len) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    append_be32(out, static_cast<std::uint32_t>(data.size()));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    append_be32(out, crc32_of(out.data() + start, out.size() - start, 0xFFFFFFFFu) ^
                         0xFFFFFFFFu);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Canvas& canvas) {
    const int w = canvas.width(), h = canvas.height();
    // Filter byte 0 in front of every scanline.
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(h) * (1 + static_cast<std::size_t>(w) * 3));
    const std::vector<std::uint8_t>& px = canvas.pixels();
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = px.data() + static_cast<std::size_t>(y) * w * 3;
        raw.insert(raw.end(), row, row + static_cast<std::size_t>(w) * 3);
    }

    std::vector<std::uint8_t> idat;
    idat.push_back(0x78);  // deflate, 32K window
    idat.push_back(0x01);
    std::size_t offset = 0;
    while (offset < raw.size()) {
        std::size_t block = std::min<std::size_t>(65535, raw.size() - offset);
        bool final = offset + block == raw.size();
        idat.push_back(final ? 1 : 0);  // stored block
        idat.push_back(static_cast<std::uint8_t>(block & 0xFF));
        idat.push_back(static_cast<std::uint8_t>(block >> 8));
        idat.push_back(static_cast<std::uint8_t>(~block & 0xFF));
        idat.push_back(static_cast<std::uint8_t>((~block >> 8) & 0xFF));
        idat.insert(idat.end(), raw.begin() + offset, raw.begin() + offset + block);
        offset += block;
    }
    append_be32(idat, adler32_of(raw.data(), raw.size()));

    std::vector<std::uint8_t> ihdr;
    append_be32(ihdr, static_cast<std::uint32_t>(w));
    append_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);

    std::vector<std::uint8_t> file = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    append_chunk(file, "IHDR", ihdr);
    append_chunk(file, "IDAT", idat);
    append_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path.string());
    out.write(reinterpret_cast<const char*>(file.data()),
              static_cast<std::streamsize>(file.size()));
    if (!out.good()) throw IoError("failed writing image " + path.string());
}

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

namespace {

constexpr Rgb kSeriesColors[] = {{40, 90, 200},  {210, 60, 50}, {40, 160, 70},
                                 {230, 150, 30}, {140, 70, 190}, {0, 160, 170}};
constexpr Rgb kAxis{60, 60, 60};
constexpr Rgb kGrid{225, 225, 225};

std::string format_number(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.3g", v);
    return buffer;
}

}  // namespace

void plot_error_curves(const std::vector<CurveSeries>& series,
                       const std::filesystem::path& path) {
    if (series.empty()) throw ConfigError("need at least one series to plot");
    std::size_t n = 0;
    double vmax = 0.0;
    for (const CurveSeries& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) vmax = std::max(vmax, v);
    }
    if (n == 0) throw ConfigError("series have no values");
    if (vmax <= 0.0) vmax = 1.0;
    vmax *= 1.08;

    const int width = 800, height = 560;
    const int left = 70, right = 30, top = 30, bottom = 56;
    Canvas canvas(width, height, {255, 255, 255});
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    auto x_at = [&](std::size_t k) {
        return n == 1 ? left + plot_w / 2.0
                      : left + plot_w * static_cast<double>(k) / (static_cast<double>(n) - 1);
    };
    auto y_at = [&](double v) { return top + plot_h * (1.0 - v / vmax); };

    for (int i = 0; i <= 5; ++i) {
        double v = vmax * i / 5.0;
        int y = static_cast<int>(std::lround(y_at(v)));
        canvas.line(left, y, width - right, y, kGrid);
        std::string label = format_number(v);
        canvas.text(left - 8 - text_width(label), y - 3, label, kAxis);
    }
    for (std::size_t k = 0; k < n; ++k) {
        int x = static_cast<int>(std::lround(x_at(k)));
        canvas.line(x, height - bottom, x, height - bottom + 4, kAxis);
        std::string label = std::to_string(k + 1);
        canvas.text(x - text_width(label) / 2, height - bottom + 8, label, kAxis);
    }
    canvas.line(left, top, left, height - bottom, kAxis);
    canvas.line(left, height - bottom, width - right, height - bottom, kAxis);
    canvas.text(left, 8, "MEAN DISPLACEMENT ERROR (M) PER STEP", kAxis);
    std::string xlabel = "PREDICTION STEP";
    canvas.text((width + left - right) / 2 - text_width(xlabel) / 2, height - 20, xlabel,
                kAxis);

    for (std::size_t si = 0; si < series.size(); ++si) {
        Rgb c = kSeriesColors[si % std::size(kSeriesColors)];
        const std::vector<double>& values = series[si].values;
        for (std::size_t k = 0; k + 1 < values.size(); ++k)
            canvas.line(x_at(k), y_at(values[k]), x_at(k + 1), y_at(values[k + 1]), c, 2);
        for (std::size_t k = 0; k < values.size(); ++k)
            stamp(canvas, static_cast<int>(std::lround(x_at(k))),
                  static_cast<int>(std::lround(y_at(values[k]))), 5, c);
    }

    int ly = top + 12;
    for (std::size_t si = 0; si < series.size(); ++si) {
        Rgb c = kSeriesColors[si % std::size(kSeriesColors)];
        canvas.line(left + 14, ly + 3, left + 38, ly + 3, c, 3);
        canvas.text(left + 46, ly, series[si].label, kAxis);
        ly += 14;
    }

    write_png(path, canvas);
}

void plot_scenario_overlay(const Scenario& scenario, const Sample& sample,
                           const std::vector<double>& prediction,
                           const std::filesystem::path& path) {
    const AgentTrack* target = nullptr;
    for (const AgentTrack& track : scenario.tracks)
        if (track.agent_id == sample.target_agent_id) target = &track;
    if (!target || sample.t_index >= target->states.size())
        throw UnknownSample("sample does not match the scenario's tracks");
    const AgentState& ego = target->states[sample.t_index];

    // Viewport around every lane polygon.
    double minx = ego.position.x, maxx = ego.position.x;
    double miny = ego.position.y, maxy = ego.position.y;
    std::vector<Polygon> lane_polys;
    for (const LaneSegment& segment : scenario.graph.segments()) {
        lane_polys.push_back(scenario.graph.polygon(segment.id));
        for (const Vec2& p : lane_polys.back()) {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
    }
    const double margin = 4.0;
    minx -= margin, maxx += margin, miny -= margin, maxy += margin;

    const int size = 900;
    Canvas canvas(size, size, {248, 248, 248});
    double scale = size / std::max(maxx - minx, maxy - miny);
    auto to_px = [&](const Vec2& p) {
        return Vec2{(p.x - minx) * scale, (maxy - p.y) * scale};
    };

    for (const Polygon& poly : lane_polys) {
        std::vector<Vec2> px;
        for (const Vec2& p : poly) px.push_back(to_px(p));
        canvas.fill_polygon(px, {214, 214, 214});
    }
    for (const LaneSegment& segment : scenario.graph.segments()) {
        for (std::size_t i = 0; i + 1 < segment.centerline.size(); ++i) {
            Vec2 a = to_px(segment.centerline[i]);
            Vec2 b = to_px(segment.centerline[i + 1]);
            canvas.dashed_line(a.x, a.y, b.x, b.y, {255, 255, 255}, 1, 5.0, 5.0);
        }
    }

    auto draw_box = [&](const AgentState& state, Rgb color, bool fill) {
        Vec2 f = heading_vec(state.heading) * (state.length / 2.0);
        Vec2 r = Vec2{f.y, -f.x}.normalized() * (state.width / 2.0);
        std::vector<Vec2> corners = {to_px(state.position + f + r),
                                     to_px(state.position + f - r),
                                     to_px(state.position - f - r),
                                     to_px(state.position - f + r)};
        if (fill) canvas.fill_polygon(corners, color);
        for (std::size_t i = 0; i < 4; ++i) {
            Vec2 a = corners[i], b = corners[(i + 1) % 4];
            canvas.line(a.x, a.y, b.x, b.y, color, 2);
        }
    };

    for (const AgentTrack& track : scenario.tracks) {
        if (track.agent_id == sample.target_agent_id) continue;
        if (sample.t_index < track.states.size())
            draw_box(track.states[sample.t_index], {120, 120, 120}, true);
    }

    auto ego_to_world_px = [&](double x, double y) {
        return to_px(ego_offset_to_world({x, y}, ego.position, ego.heading));
    };
    auto draw_path = [&](const std::vector<double>& pts, Rgb c, bool dashed, int thickness) {
        Vec2 prev = ego_to_world_px(pts[0], pts[1]);
        for (std::size_t i = 1; i < pts.size() / 2; ++i) {
            Vec2 cur = ego_to_world_px(pts[2 * i], pts[2 * i + 1]);
            if (dashed)
                canvas.dashed_line(prev.x, prev.y, cur.x, cur.y, c, thickness, 7.0, 5.0);
            else
                canvas.line(prev.x, prev.y, cur.x, cur.y, c, thickness);
            prev = cur;
        }
    };

    std::vector<double> history = widen(sample.history_positions);
    std::vector<double> future = widen(sample.future_positions);
    int n = static_cast<int>(future.size() / 2);
    std::vector<double> linear = constant_velocity_prediction(sample.history_positions, n);

    draw_path(history, {158, 186, 230}, false, 3);
    draw_path(future, {40, 150, 60}, false, 3);
    if (!prediction.empty()) {
        if (prediction.size() % 2) throw ShapeMismatch("prediction must be (n,2)");
        draw_path(prediction, {205, 50, 45}, false, 3);
    }
    draw_path(linear, {235, 150, 25}, true, 2);
    draw_box(ego, {35, 80, 190}, false);

    struct Legend {
        const char* label;
        Rgb color;
        bool dashed;
    } legend[] = {{"HISTORY", {158, 186, 230}, false},
                  {"GROUND TRUTH", {40, 150, 60}, false},
                  {"PREDICTION", {205, 50, 45}, false},
                  {"LINEAR REFERENCE", {235, 150, 25}, true}};
    int ly = 14;
    for (const Legend& item : legend) {
        if (item.dashed)
            canvas.dashed_line(14, ly + 3, 44, ly + 3, item.color, 3, 6.0, 4.0);
        else
            canvas.line(14, ly + 3, 44, ly + 3, item.color, 3);
        canvas.text(52, ly, item.label, {50, 50, 50});
        ly += 15;
    }
    canvas.text(14, ly + 2, scenario.scenario_id + " / " + sample.target_agent_id + " / T=" +
                                std::to_string(sample.t_index),
                {50, 50, 50});

    write_png(path, canvas);
}

}  // namespace sapi
