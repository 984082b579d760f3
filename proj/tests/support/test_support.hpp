#pragma once
// Shared helpers for the test binaries: scratch directories, small fixtures,
// and reference computations implemented independently of the library code
// they are used to check.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sapi/dataset.hpp"
#include "sapi/lane_graph.hpp"
#include "sapi/model.hpp"
#include "sapi/train_eval.hpp"

namespace support {

// ---------------------------------------------------------------------------
// Scratch directories
// ---------------------------------------------------------------------------

class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sapilab_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

  private:
    std::filesystem::path path_;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

inline bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
    return read_file_bytes(a) == read_file_bytes(b);
}

// ---------------------------------------------------------------------------
// Reference geometry (written from the plain textbook formulas)
// ---------------------------------------------------------------------------

struct RefProjection {
    double arc = 0.0;
    double dist2 = std::numeric_limits<double>::infinity();
    sapi::Vec2 tangent;
};

inline RefProjection ref_project(const sapi::Polyline& line, const sapi::Vec2& p) {
    RefProjection best;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const sapi::Vec2 a = line[i], b = line[i + 1];
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        const double len = std::sqrt(len2);
        double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
        t = std::clamp(t, 0.0, 1.0);
        const double cx = a.x + t * dx - p.x, cy = a.y + t * dy - p.y;
        const double d2 = cx * cx + cy * cy;
        if (d2 < best.dist2) {
            best.dist2 = d2;
            best.arc = cum + t * len;
            best.tangent = {dx / len, dy / len};
        }
        cum += len;
    }
    return best;
}

// Classic even-odd crossing test.
inline bool ref_inside(const sapi::Polygon& poly, const sapi::Vec2& p) {
    bool in = false;
    const std::size_t nv = poly.size();
    for (std::size_t i = 0, j = nv - 1; i < nv; j = i++) {
        if ((poly[i].y > p.y) != (poly[j].y > p.y)) {
            const double xi = (poly[j].x - poly[i].x) * (p.y - poly[i].y) /
                                  (poly[j].y - poly[i].y) +
                              poly[i].x;
            if (p.x < xi) in = !in;
        }
    }
    return in;
}

// ---------------------------------------------------------------------------
// Reference reachable-area queries. Forward reachability is recomputed here
// as an explicit best-entry-budget fixpoint over all successor paths; a
// segment is reachable when some path delivers a strictly positive remaining
// budget at its entry. The query segment itself is traversable (cycles) but
// never part of the result.
// ---------------------------------------------------------------------------

// Centerline length in the same leg-by-leg metric as ref_project, so that an
// offset clamped to the far end cancels the remaining length exactly instead
// of leaving an ulp of phantom budget.
inline double ref_length(const sapi::Polyline& line) {
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const double dx = line[i + 1].x - line[i].x, dy = line[i + 1].y - line[i].y;
        cum += std::sqrt(dx * dx + dy * dy);
    }
    return cum;
}

inline std::set<sapi::SegmentId> ref_forward(const sapi::LaneGraph& graph,
                                             const sapi::SegmentId& start, double offset,
                                             double d) {
    std::map<sapi::SegmentId, double> best;
    std::vector<std::pair<sapi::SegmentId, double>> stack;
    const double initial = d - (ref_length(graph.segment(start).centerline) - offset);
    for (const sapi::SegmentId& succ : graph.segment(start).successors)
        stack.push_back({succ, initial});
    while (!stack.empty()) {
        auto [id, budget] = stack.back();
        stack.pop_back();
        if (budget <= 0.0) continue;
        auto it = best.find(id);
        if (it != best.end() && it->second >= budget) continue;
        best[id] = budget;
        const double next = budget - graph.arc_length(id);
        for (const sapi::SegmentId& succ : graph.segment(id).successors)
            stack.push_back({succ, next});
    }
    std::set<sapi::SegmentId> out;
    for (const auto& [id, budget] : best)
        if (id != start) out.insert(id);
    return out;
}

inline sapi::SegmentId ref_locate(const sapi::LaneGraph& graph, const sapi::Vec2& p,
                                  double heading) {
    const sapi::Vec2 h{std::cos(heading), std::sin(heading)};
    const sapi::LaneSegment* best = nullptr;
    double best_cos = -2.0;
    for (const sapi::LaneSegment& seg : graph.segments()) {  // sorted by id
        if (!ref_inside(graph.polygon(seg.id), p)) continue;
        const RefProjection proj = ref_project(seg.centerline, p);
        const double c = proj.tangent.x * h.x + proj.tangent.y * h.y;
        if (c > best_cos) {  // ties keep the earlier (lower) id
            best_cos = c;
            best = &seg;
        }
    }
    if (!best) throw sapi::NotOnRoad("reference: position is off every lane");
    return best->id;
}

inline sapi::LraResult ref_lra(const sapi::LaneGraph& graph, const sapi::Vec2& p,
                               double heading, double d) {
    sapi::LraResult r;
    r.c1 = ref_locate(graph, p, heading);
    const sapi::LaneSegment& seg = graph.segment(r.c1);
    r.c2 = ref_forward(graph, r.c1, ref_project(seg.centerline, p).arc, d);
    if (seg.left_change_legal && seg.left_neighbor) r.c3.insert(*seg.left_neighbor);
    if (seg.right_change_legal && seg.right_neighbor) r.c3.insert(*seg.right_neighbor);
    for (const sapi::SegmentId& nb : r.c3) {
        auto reach = ref_forward(graph, nb, ref_project(graph.segment(nb).centerline, p).arc, d);
        r.c4.insert(reach.begin(), reach.end());
    }
    r.all.insert(r.c1);
    r.all.insert(r.c2.begin(), r.c2.end());
    r.all.insert(r.c3.begin(), r.c3.end());
    r.all.insert(r.c4.begin(), r.c4.end());
    return r;
}

// ---------------------------------------------------------------------------
// Random graph / query generators for equivalence fuzzing. Successor topology
// is intentionally arbitrary (including cycles and self-loops): reachability
// only depends on lengths and links, not on geometric continuity.
// ---------------------------------------------------------------------------

inline sapi::LaneGraph random_graph(std::mt19937_64& rng, int max_segments) {
    const int count = 2 + static_cast<int>(sapi::uniform_index(rng, max_segments - 1));
    std::vector<sapi::LaneSegment> segs(count);
    for (int i = 0; i < count; ++i) {
        sapi::LaneSegment& s = segs[i];
        char buf[8];
        std::snprintf(buf, sizeof buf, "g%02d", i);
        s.id = buf;
        sapi::Vec2 p{sapi::uniform_in(rng, 0.0, 400.0), sapi::uniform_in(rng, 0.0, 400.0)};
        double ang = sapi::uniform_in(rng, 0.0, 6.283185307179586);
        s.centerline.push_back(p);
        const int pieces = 1 + static_cast<int>(sapi::uniform_index(rng, 3));
        for (int k = 0; k < pieces; ++k) {
            const double len = sapi::uniform_in(rng, 6.0, 20.0);
            p = {p.x + len * std::cos(ang), p.y + len * std::sin(ang)};
            s.centerline.push_back(p);
            ang += sapi::uniform_in(rng, -0.25, 0.25);  // gentle: no buffer fold
        }
        s.width = sapi::uniform_in(rng, 2.5, 4.5);
    }
    for (sapi::LaneSegment& s : segs) {
        const int n_succ = static_cast<int>(sapi::uniform_index(rng, 3));
        for (int k = 0; k < n_succ; ++k)
            s.successors.push_back(segs[sapi::uniform_index(rng, segs.size())].id);
    }
    const int pairs = static_cast<int>(sapi::uniform_index(rng, count / 2 + 1));
    for (int k = 0; k < pairs; ++k) {
        const std::size_t a = sapi::uniform_index(rng, segs.size());
        const std::size_t b = sapi::uniform_index(rng, segs.size());
        if (a == b || segs[a].left_neighbor || segs[b].right_neighbor) continue;
        segs[a].left_neighbor = segs[b].id;
        segs[a].left_change_legal = sapi::uniform_unit(rng) < 0.7;
        segs[b].right_neighbor = segs[a].id;
        segs[b].right_change_legal = sapi::uniform_unit(rng) < 0.7;
    }
    return sapi::LaneGraph::build(std::move(segs));
}

struct Query {
    sapi::Vec2 position;
    double heading = 0.0;
};

// A pose safely inside one lane polygon, roughly aligned with its direction.
inline Query random_query(const sapi::LaneGraph& graph, std::mt19937_64& rng) {
    const auto& segs = graph.segments();
    const sapi::LaneSegment& seg = segs[sapi::uniform_index(rng, segs.size())];
    const double s = sapi::uniform_in(rng, 0.15, 0.85) * graph.arc_length(seg.id);
    const sapi::Vec2 c = sapi::point_at_arc(seg.centerline, s);
    const sapi::Vec2 t = sapi::tangent_at_arc(seg.centerline, s);
    const double lat = sapi::uniform_in(rng, -0.3, 0.3) * seg.width;
    Query q;
    q.position = {c.x - t.y * lat, c.y + t.x * lat};
    q.heading = std::atan2(t.y, t.x) + sapi::uniform_in(rng, -0.4, 0.4);
    return q;
}

// ---------------------------------------------------------------------------
// Reference pixel-energy formula (real-valued, before rounding)
// ---------------------------------------------------------------------------

inline double ref_motion_energy(double size, double speed) {
    return 255.0 * (1.0 - std::exp(-1.0 / (0.01 * size * speed * speed + 1.0)));
}

// ---------------------------------------------------------------------------
// Simple lane fixtures
// ---------------------------------------------------------------------------

inline sapi::LaneGraph straight_graph(double length = 400.0, double width = 3.5) {
    sapi::LaneSegment s;
    s.id = "main";
    s.centerline = {{0.0, 0.0}, {length, 0.0}};
    s.width = width;
    return sapi::LaneGraph::build({s});
}

// Constant-speed drive along +x starting at x0; one state per tick.
inline sapi::AgentTrack straight_track(int steps, double speed, double x0 = 0.0,
                                       const std::string& id = "a0") {
    sapi::AgentTrack t;
    t.agent_id = id;
    t.behavior_label = sapi::Behavior::straight;
    for (int k = 0; k < steps; ++k)
        t.states.push_back(sapi::AgentState::make(
            {x0 + speed * sapi::kTickSeconds * k, 0.0}, 0.0, speed, 4.5, 2.0));
    return t;
}

// ---------------------------------------------------------------------------
// Model fixtures
// ---------------------------------------------------------------------------

inline sapi::ModelConfig tiny_model_config() {
    sapi::ModelConfig c;
    c.m = 4;
    c.n = 2;
    c.raster_h = 16;
    c.raster_w = 16;
    c.c3d_channels = 2;
    c.c3d_kt = 3;
    c.c3d_kh = 3;
    c.c3d_kw = 3;
    c.pool_t = 1;
    c.pool_h = 4;
    c.pool_w = 4;
    c.c2d_channels = 3;
    c.c2d_k = 3;
    c.scene_fc = 8;
    c.lstm_hidden = 6;
    c.c1d_channels = 5;
    c.c1d_k = 3;
    c.refine_h = 4;
    c.gru_hidden = 6;
    c.dec_fc1 = 8;
    c.dec_fc2 = 7;
    c.baseline_hidden = 6;
    c.baseline_fc = 5;
    return c;
}

// A structurally valid sample with arbitrary contents; enough for any pure
// network-math test (nothing checks physical consistency there).
inline sapi::Sample random_sample(const sapi::ModelConfig& cfg, std::mt19937_64& rng) {
    sapi::Sample s;
    s.scenario_id = "fixture";
    s.target_agent_id = "a0";
    s.t_index = static_cast<std::size_t>(cfg.m) - 1;
    s.behavior_label = sapi::Behavior::straight;
    for (int k = 0; k < cfg.m; ++k) {
        s.history_positions.push_back(static_cast<float>(sapi::uniform_in(rng, -20.0, 20.0)));
        s.history_positions.push_back(static_cast<float>(sapi::uniform_in(rng, -20.0, 20.0)));
    }
    s.history_positions[2 * (cfg.m - 1)] = 0.0f;
    s.history_positions[2 * (cfg.m - 1) + 1] = 0.0f;
    for (int k = 0; k < cfg.n; ++k) {
        s.future_positions.push_back(static_cast<float>(sapi::uniform_in(rng, -30.0, 30.0)));
        s.future_positions.push_back(static_cast<float>(sapi::uniform_in(rng, -30.0, 30.0)));
    }
    const std::size_t px = static_cast<std::size_t>(cfg.raster_h) * cfg.raster_w;
    for (int k = 0; k < cfg.m; ++k) {
        sapi::EnvRaster r;
        r.height_px = cfg.raster_h;
        r.width_px = cfg.raster_w;
        r.lra_channel.resize(px);
        r.traffic_channel.resize(px);
        for (auto& v : r.lra_channel) v = sapi::uniform_unit(rng) < 0.5 ? 0 : 255;
        for (auto& v : r.traffic_channel)
            v = static_cast<std::uint8_t>(sapi::uniform_index(rng, 256));
        r.timestamp = k * sapi::kTickSeconds;
        s.history_rasters.push_back(std::move(r));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking. Callers run forward + backward once so
// ParamBlock::grad holds the analytic gradients, then pass a loss() that
// re-evaluates the scalar loss at the current parameter values.
// ---------------------------------------------------------------------------

struct FdReport {
    double max_rel = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::string worst_entry;
    std::size_t checked = 0;
};

template <class LossFn>
FdReport fd_check(sapi::ParamSet& params, LossFn&& loss, double h = 1e-5) {
    FdReport report;
    for (sapi::ParamBlock& block : params.blocks()) {
        for (std::size_t i = 0; i < block.value.size(); ++i) {
            const double saved = block.value[i];
            block.value[i] = saved + h;
            const double lp = loss();
            block.value[i] = saved - h;
            const double lm = loss();
            block.value[i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = block.grad[i];
            // Central differences on a loss of order 1 carry ~1e-9 absolute
            // noise at this step size, so gradients below the floor are held
            // to an absolute bound instead of an unobtainable relative one.
            const double denom =
                std::max({std::abs(numeric), std::abs(analytic), 1e-4});
            const double rel = std::abs(numeric - analytic) / denom;
            ++report.checked;
            if (rel > report.max_rel) {
                report.max_rel = rel;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
                report.worst_entry = block.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Independent PNG reader: signature, chunk CRCs, IHDR fields, and the
// stored-block zlib stream are all validated with local reimplementations.
// ---------------------------------------------------------------------------

inline std::uint32_t ref_crc32(const std::uint8_t* data, std::size_t len) {
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) {
        crc ^= data[i];
        for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return crc ^ 0xFFFFFFFFu;
}

inline std::uint32_t ref_adler32(const std::uint8_t* data, std::size_t len) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

struct ParsedPng {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    int bit_depth = 0;
    int color_type = 0;
    std::vector<std::uint8_t> rgb;  // height * width * 3, defiltered

    std::uint8_t at(std::uint32_t x, std::uint32_t y, int ch) const {
        return rgb.at((static_cast<std::size_t>(y) * width + x) * 3 + ch);
    }
};

inline ParsedPng parse_png(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    auto fail = [&](const std::string& why) {
        throw std::runtime_error("png " + path.string() + ": " + why);
    };
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() < 8 || !std::equal(sig, sig + 8, bytes.begin())) fail("bad signature");

    auto be32 = [&](std::size_t at) -> std::uint32_t {
        return (std::uint32_t(bytes[at]) << 24) | (std::uint32_t(bytes[at + 1]) << 16) |
               (std::uint32_t(bytes[at + 2]) << 8) | std::uint32_t(bytes[at + 3]);
    };

    ParsedPng png;
    std::vector<std::uint8_t> idat;
    bool saw_end = false;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(pos);
        if (pos + 12 + len > bytes.size()) fail("truncated chunk");
        const std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
        const std::uint32_t crc = be32(pos + 8 + len);
        if (crc != ref_crc32(bytes.data() + pos + 4, len + 4)) fail("chunk crc mismatch");
        const std::uint8_t* data = bytes.data() + pos + 8;
        if (type == "IHDR") {
            if (len != 13) fail("bad IHDR length");
            png.width = be32(pos + 8);
            png.height = be32(pos + 12);
            png.bit_depth = data[8];
            png.color_type = data[9];
            if (data[10] != 0 || data[11] != 0 || data[12] != 0)
                fail("unexpected compression/filter/interlace");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            saw_end = true;
            break;
        }
        pos += 12 + len;
    }
    if (!saw_end) fail("missing IEND");
    if (png.bit_depth != 8 || png.color_type != 2) fail("expected 8-bit truecolor");

    // zlib wrapper with stored deflate blocks only.
    if (idat.size() < 6) fail("idat too small");
    if ((idat[0] & 0x0F) != 8) fail("not deflate");
    if (((idat[0] << 8) | idat[1]) % 31 != 0) fail("bad zlib header check");
    std::vector<std::uint8_t> raw;
    std::size_t ip = 2;
    while (true) {
        if (ip >= idat.size() - 4) fail("deflate stream ran out");
        const std::uint8_t header = idat[ip++];
        if (((header >> 1) & 3) != 0) fail("expected a stored block");
        if (ip + 4 > idat.size()) fail("truncated stored header");
        const std::uint32_t blen = idat[ip] | (std::uint32_t(idat[ip + 1]) << 8);
        const std::uint32_t nlen = idat[ip + 2] | (std::uint32_t(idat[ip + 3]) << 8);
        if ((blen ^ 0xFFFFu) != nlen) fail("stored length check failed");
        ip += 4;
        if (ip + blen > idat.size() - 4) fail("stored block overruns");
        raw.insert(raw.end(), idat.begin() + ip, idat.begin() + ip + blen);
        ip += blen;
        if (header & 1) break;
    }
    const std::uint32_t adler = (std::uint32_t(idat[ip]) << 24) |
                                (std::uint32_t(idat[ip + 1]) << 16) |
                                (std::uint32_t(idat[ip + 2]) << 8) | std::uint32_t(idat[ip + 3]);
    if (adler != ref_adler32(raw.data(), raw.size())) fail("adler mismatch");

    const std::size_t stride = 1 + static_cast<std::size_t>(png.width) * 3;
    if (raw.size() != stride * png.height) fail("pixel payload size mismatch");
    png.rgb.reserve(static_cast<std::size_t>(png.width) * png.height * 3);
    for (std::uint32_t r = 0; r < png.height; ++r) {
        if (raw[r * stride] != 0) fail("expected filter type 0");
        png.rgb.insert(png.rgb.end(), raw.begin() + r * stride + 1,
                       raw.begin() + (r + 1) * stride);
    }
    return png;
}

}  // namespace support
