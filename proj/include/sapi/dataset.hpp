#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sapi/raster.hpp"
#include "sapi/simgen.hpp"

namespace sapi {

// One model-ready example: m observed steps and n future steps for one agent,
// all positions in meters in the ego frame of the last observed step (that
// step is exactly (0,0) with the heading mapped to +y). Rasters are aligned
// 1:1 with the history steps, oldest first. Positions are kept in 32-bit
// floats so archive round-trips are bit-exact.
struct Sample {
    std::string scenario_id;
    std::string target_agent_id;
    std::size_t t_index = 0;  // track index of the last observed step
    Behavior behavior_label = Behavior::straight;
    std::vector<float> history_positions;  // m x 2 row-major (x right, y ahead)
    std::vector<float> future_positions;   // n x 2
    std::vector<EnvRaster> history_rasters;  // m entries when materialized
};

struct DatasetMeta {
    int m = 12;
    int n = 15;
    double d = 100.0;  // reachable-area search depth, meters
    RasterConfig raster;
};

Json raster_config_to_json(const RasterConfig& config);
RasterConfig raster_config_from_json(const Json& j);

struct Dataset {
    DatasetMeta meta;
    std::vector<Sample> samples;
};

// Slides a stride-1 window over every track: one sample per (agent, t_index)
// with m history and n future states. Rasters are built per history step in
// that step's own ego frame. Windows whose target pose is off every lane are
// dropped (counted in *skipped when given) rather than raised.
std::vector<Sample> extract_samples(const LaneGraph& graph,
                                    const std::vector<AgentTrack>& tracks, int m, int n,
                                    double d, const RasterConfig& config,
                                    const std::string& scenario_id,
                                    std::size_t* skipped = nullptr);

// Convenience: extract from every scenario in order.
Dataset build_dataset(const std::vector<Scenario>& scenarios, const DatasetMeta& meta,
                      std::size_t* skipped = nullptr);

struct SplitManifest {
    std::vector<std::size_t> train, val, test;  // indices into the sample list
    std::uint64_t seed = 0;

    Json to_json() const;
    static SplitManifest from_json(const Json& j);
};

// Scenario-level split: scenarios are shuffled by seed and partitioned by the
// cumulative ratio; each sample follows its scenario. No scenario ever spans
// two splits.
SplitManifest split(const std::vector<Sample>& samples, std::array<int, 3> ratio,
                    std::uint64_t seed);

struct ArchiveOptions {
    bool rasters_inline = true;
    // When rasters are not inline they are rebuilt on read from this scenario
    // JSONL file (relative paths resolve against the archive directory).
    std::string scenarios_path;
};

// Archive layout: <dir>/manifest.json plus one little-endian float32 blob per
// tensor. Raster blobs hold the two channels per step scaled 0..255.
void write_samples(const Dataset& dataset, const std::filesystem::path& dir,
                   const ArchiveOptions& options = {});
Dataset read_samples(const std::filesystem::path& dir);

}  // namespace sapi
