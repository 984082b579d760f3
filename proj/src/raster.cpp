#include "sapi/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace sapi {

void RasterConfig::validate() const {
    if (height_px <= 0 || width_px <= 0) throw ConfigError("raster dimensions must be positive");
    if (!(resolution > 0.0)) throw ConfigError("raster resolution must be positive");
}

namespace {

double snap_trig(double v) {
    if (std::abs(v) < 1e-12) return 0.0;
    if (std::abs(v - 1.0) < 1e-12) return 1.0;
    if (std::abs(v + 1.0) < 1e-12) return -1.0;
    return v;
}

struct EgoFrame {
    Vec2 origin;
    Vec2 forward;  // heading direction
    Vec2 right;
    Vec2 anchor;
    double inv_res;

    EgoFrame(const Vec2& ego_position, double ego_heading, const RasterConfig& config) {
        origin = ego_position;
        // Exact cardinal rotations keep axis-aligned scenes bit-stable.
        forward = {snap_trig(std::cos(ego_heading)), snap_trig(std::sin(ego_heading))};
        right = {forward.y, -forward.x};
        anchor = config.ego_anchor();
        inv_res = 1.0 / config.resolution;
    }

    Vec2 to_pixel(const Vec2& world) const {
        Vec2 v = world - origin;
        double ahead = v.dot(forward);
        double lateral = v.dot(right);
        return {anchor.x + lateral * inv_res, anchor.y - ahead * inv_res};
    }
};

// Even-odd scanline fill over pixel centers at integer coordinates, using the
// same half-open crossing rule as point_in_polygon. apply(row, col) is called
// once per covered pixel per polygon.
template <typename Apply>
void fill_polygon_pixels(const Polygon& pixel_poly, int width_px, int height_px, Apply&& apply) {
    if (pixel_poly.size() < 3) return;
    double y_min = 1e300, y_max = -1e300;
    for (const Vec2& p : pixel_poly) {
        y_min = std::min(y_min, p.y);
        y_max = std::max(y_max, p.y);
    }
    int row0 = std::max(0, static_cast<int>(std::ceil(y_min)));
    int row1 = std::min(height_px - 1, static_cast<int>(std::floor(y_max)));
    std::vector<double> xs;
    for (int row = row0; row <= row1; ++row) {
        double y = static_cast<double>(row);
        xs.clear();
        std::size_t n = pixel_poly.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = pixel_poly[j];
            const Vec2& b = pixel_poly[i];
            if ((b.y > y) != (a.y > y))
                xs.push_back(b.x + (y - b.y) / (a.y - b.y) * (a.x - b.x));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            int c0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
            int c1 = std::min(width_px, static_cast<int>(std::ceil(xs[k + 1])));
            for (int col = c0; col < c1; ++col) apply(row, col);
        }
    }
}

}  // namespace

Vec2 ego_transform(const Vec2& world_point, const Vec2& ego_position, double ego_heading,
                   const RasterConfig& config) {
    return EgoFrame(ego_position, ego_heading, config).to_pixel(world_point);
}

Vec2 ego_offset_meters(const Vec2& world_point, const Vec2& ego_position, double ego_heading) {
    Vec2 forward{snap_trig(std::cos(ego_heading)), snap_trig(std::sin(ego_heading))};
    Vec2 right{forward.y, -forward.x};
    Vec2 v = world_point - ego_position;
    return {v.dot(right), v.dot(forward)};
}

Vec2 ego_offset_to_world(const Vec2& offset, const Vec2& ego_position, double ego_heading) {
    Vec2 forward{snap_trig(std::cos(ego_heading)), snap_trig(std::sin(ego_heading))};
    Vec2 right{forward.y, -forward.x};
    return ego_position + right * offset.x + forward * offset.y;
}

std::vector<std::uint8_t> rasterize_lra(const std::vector<Polygon>& lra_polygons,
                                        const Vec2& ego_position, double ego_heading,
                                        const RasterConfig& config) {
    config.validate();
    std::vector<std::uint8_t> channel(
        static_cast<std::size_t>(config.height_px) * config.width_px, 0);
    EgoFrame frame(ego_position, ego_heading, config);
    Polygon pixel_poly;
    for (const Polygon& poly : lra_polygons) {
        pixel_poly.clear();
        for (const Vec2& p : poly) pixel_poly.push_back(frame.to_pixel(p));
        fill_polygon_pixels(pixel_poly, config.width_px, config.height_px,
                            [&](int row, int col) {
                                channel[static_cast<std::size_t>(row) * config.width_px + col] = 255;
                            });
    }
    return channel;
}

int motion_energy_pixel(double footprint_size, double speed) {
    double energy = 0.01 * footprint_size * speed * speed + 1.0;
    double value = 255.0 * (1.0 - std::exp(-1.0 / energy));
    return static_cast<int>(std::lround(value));
}

std::vector<std::uint8_t> rasterize_traffic(const std::vector<AgentState>& agents,
                                            const Vec2& ego_position, double ego_heading,
                                            const RasterConfig& config) {
    config.validate();
    std::vector<std::uint8_t> channel(
        static_cast<std::size_t>(config.height_px) * config.width_px, 255);
    EgoFrame frame(ego_position, ego_heading, config);
    for (const AgentState& agent : agents) {
        validate_agent_state(agent);
        std::uint8_t value =
            static_cast<std::uint8_t>(motion_energy_pixel(agent.footprint_size, agent.speed));
        Vec2 f = heading_vec(agent.heading) * (agent.length / 2.0);
        Vec2 r = Vec2{f.y, -f.x}.normalized() * (agent.width / 2.0);
        Polygon box = {agent.position + f + r, agent.position + f - r,
                       agent.position - f - r, agent.position - f + r};
        Polygon pixel_poly;
        for (const Vec2& p : box) pixel_poly.push_back(frame.to_pixel(p));
        // Highest motion energy (lowest value) wins where boxes overlap.
        fill_polygon_pixels(pixel_poly, config.width_px, config.height_px,
                            [&](int row, int col) {
                                std::uint8_t& px =
                                    channel[static_cast<std::size_t>(row) * config.width_px + col];
                                px = std::min(px, value);
                            });
    }
    return channel;
}

EnvRaster build_env(std::vector<std::uint8_t> lra_channel, std::vector<std::uint8_t> traffic_channel,
                    const RasterConfig& config, double timestamp) {
    config.validate();
    std::size_t expected = static_cast<std::size_t>(config.height_px) * config.width_px;
    if (lra_channel.size() != expected || traffic_channel.size() != expected)
        throw ShapeMismatch("channel sizes do not match raster config");
    EnvRaster env;
    env.height_px = config.height_px;
    env.width_px = config.width_px;
    env.lra_channel = std::move(lra_channel);
    env.traffic_channel = std::move(traffic_channel);
    env.timestamp = timestamp;
    return env;
}

std::vector<std::pair<EnvRaster, Vec2>> build_history(const LaneGraph& graph,
                                                      const AgentTrack& target_track,
                                                      const std::vector<AgentTrack>& other_tracks,
                                                      std::size_t t_index, int m, double d,
                                                      const RasterConfig& config) {
    config.validate();
    if (m < 1) throw ConfigError("history length m must be >= 1");
    if (t_index >= target_track.states.size() || t_index + 1 < static_cast<std::size_t>(m))
        throw InsufficientHistory("track '" + target_track.agent_id + "' lacks " +
                                  std::to_string(m) + " history states at index " +
                                  std::to_string(t_index));

    std::vector<std::pair<EnvRaster, Vec2>> history;
    history.reserve(static_cast<std::size_t>(m));
    for (std::size_t k = t_index + 1 - static_cast<std::size_t>(m); k <= t_index; ++k) {
        const AgentState& pose = target_track.states[k];
        LraResult lra = compute_lra(graph, pose.position, pose.heading, d);
        std::vector<Polygon> polys;
        polys.reserve(lra.all.size());
        for (const SegmentId& id : lra.all) polys.push_back(graph.polygon(id));
        std::vector<std::uint8_t> lra_ch = rasterize_lra(polys, pose.position, pose.heading, config);

        std::vector<AgentState> others;
        for (const AgentTrack& track : other_tracks) {
            if (track.agent_id == target_track.agent_id) continue;
            if (k < track.states.size()) others.push_back(track.states[k]);
        }
        std::vector<std::uint8_t> traffic_ch =
            rasterize_traffic(others, pose.position, pose.heading, config);

        history.emplace_back(build_env(std::move(lra_ch), std::move(traffic_ch), config,
                                       target_track.time_at(k)),
                             pose.position);
    }
    return history;
}

void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != static_cast<std::size_t>(width) * height)
        throw ShapeMismatch("pixel buffer does not match PGM dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace sapi
