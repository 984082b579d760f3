#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sapi/agents.hpp"
#include "sapi/lane_graph.hpp"

namespace sapi {

struct RasterConfig {
    int height_px = 200;
    int width_px = 200;
    double resolution = 0.5;  // meters per pixel

    // Target vehicle pixel: mid-bottom of the image.
    Vec2 ego_anchor() const { return {static_cast<double>(width_px / 2), static_cast<double>(height_px - 1)}; }
    void validate() const;
};

// Two-channel ego-frame environment image: channel 0 is the reachable-area
// mask (values exactly 0 or 255), channel 1 encodes surrounding traffic
// (background 255, occupied boxes darker with motion energy).
struct EnvRaster {
    int height_px = 0;
    int width_px = 0;
    std::vector<std::uint8_t> lra_channel;      // row-major from top-left
    std::vector<std::uint8_t> traffic_channel;  // same layout
    double timestamp = 0.0;

    std::uint8_t lra_at(int row, int col) const { return lra_channel[static_cast<std::size_t>(row) * width_px + col]; }
    std::uint8_t traffic_at(int row, int col) const { return traffic_channel[static_cast<std::size_t>(row) * width_px + col]; }
};

// World point -> real-valued pixel coordinate in the target vehicle's frame
// (heading maps to image-up, ego at the anchor). Out-of-frame results are
// legal; callers clip.
Vec2 ego_transform(const Vec2& world_point, const Vec2& ego_position, double ego_heading,
                   const RasterConfig& config);

// World point -> (lateral, ahead) meters in the same ego frame the rasters
// use: +y is the ego heading, +x is the ego's right.
Vec2 ego_offset_meters(const Vec2& world_point, const Vec2& ego_position, double ego_heading);

// Inverse of ego_offset_meters.
Vec2 ego_offset_to_world(const Vec2& offset, const Vec2& ego_position, double ego_heading);

std::vector<std::uint8_t> rasterize_lra(const std::vector<Polygon>& lra_polygons,
                                        const Vec2& ego_position, double ego_heading,
                                        const RasterConfig& config);

// 255 * (1 - exp(-1 / (0.01 * size * v^2 + 1))), rounded to nearest integer.
// Strictly decreasing in size * v^2: faster or larger vehicles render darker.
int motion_energy_pixel(double footprint_size, double speed);

std::vector<std::uint8_t> rasterize_traffic(const std::vector<AgentState>& agents,
                                            const Vec2& ego_position, double ego_heading,
                                            const RasterConfig& config);

EnvRaster build_env(std::vector<std::uint8_t> lra_channel, std::vector<std::uint8_t> traffic_channel,
                    const RasterConfig& config, double timestamp);

// One (raster, target world position) pair per history step, oldest first.
// Each step is rendered in that step's own ego frame.
std::vector<std::pair<EnvRaster, Vec2>> build_history(const LaneGraph& graph,
                                                      const AgentTrack& target_track,
                                                      const std::vector<AgentTrack>& other_tracks,
                                                      std::size_t t_index, int m, double d,
                                                      const RasterConfig& config);

// Debug export: binary 8-bit PGM (P5), row-major from top-left.
void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& pixels);

}  // namespace sapi
