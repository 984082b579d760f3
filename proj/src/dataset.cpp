#include "sapi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace sapi {

Json raster_config_to_json(const RasterConfig& config) {
    return Json{{"height_px", config.height_px},
                {"width_px", config.width_px},
                {"resolution", config.resolution}};
}

RasterConfig raster_config_from_json(const Json& j) {
    reject_unknown_keys(j, {"height_px", "width_px", "resolution"}, "raster config");
    RasterConfig config;
    config.height_px = j.at("height_px").get<int>();
    config.width_px = j.at("width_px").get<int>();
    config.resolution = j.at("resolution").get<double>();
    config.validate();
    return config;
}

namespace {

std::string blob_name(std::size_t index, const char* kind) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "s%06zu_%s.f32", index, kind);
    return buf;
}

}  // namespace

std::vector<Sample> extract_samples(const LaneGraph& graph,
                                    const std::vector<AgentTrack>& tracks, int m, int n,
                                    double d, const RasterConfig& config,
                                    const std::string& scenario_id, std::size_t* skipped) {
    if (m < 1 || n < 1) throw ConfigError("sample window lengths m and n must be >= 1");
    config.validate();
    std::vector<Sample> samples;
    for (const AgentTrack& track : tracks) {
        const std::size_t len = track.states.size();
        const std::size_t window = static_cast<std::size_t>(m) + static_cast<std::size_t>(n);
        if (len < window) continue;
        for (std::size_t t = static_cast<std::size_t>(m) - 1; t + n < len; ++t) {
            Sample sample;
            sample.scenario_id = scenario_id;
            sample.target_agent_id = track.agent_id;
            sample.t_index = t;
            sample.behavior_label = track.behavior_label;

            std::vector<std::pair<EnvRaster, Vec2>> history;
            try {
                history = build_history(graph, track, tracks, t, m, d, config);
            } catch (const NotOnRoad&) {
                if (skipped) ++*skipped;
                continue;
            }
            const Vec2 ego_pos = track.states[t].position;
            const double ego_heading = track.states[t].heading;
            sample.history_positions.reserve(static_cast<std::size_t>(m) * 2);
            sample.history_rasters.reserve(static_cast<std::size_t>(m));
            for (auto& [raster, world] : history) {
                Vec2 p = ego_offset_meters(world, ego_pos, ego_heading);
                sample.history_positions.push_back(static_cast<float>(p.x));
                sample.history_positions.push_back(static_cast<float>(p.y));
                sample.history_rasters.push_back(std::move(raster));
            }
            sample.future_positions.reserve(static_cast<std::size_t>(n) * 2);
            for (int j = 1; j <= n; ++j) {
                Vec2 p = ego_offset_meters(track.states[t + static_cast<std::size_t>(j)].position,
                                           ego_pos, ego_heading);
                sample.future_positions.push_back(static_cast<float>(p.x));
                sample.future_positions.push_back(static_cast<float>(p.y));
            }
            samples.push_back(std::move(sample));
        }
    }
    return samples;
}

Dataset build_dataset(const std::vector<Scenario>& scenarios, const DatasetMeta& meta,
                      std::size_t* skipped) {
    Dataset dataset;
    dataset.meta = meta;
    for (const Scenario& scenario : scenarios) {
        std::vector<Sample> samples =
            extract_samples(scenario.graph, scenario.tracks, meta.m, meta.n, meta.d,
                            meta.raster, scenario.scenario_id, skipped);
        for (Sample& sample : samples) dataset.samples.push_back(std::move(sample));
    }
    return dataset;
}

Json SplitManifest::to_json() const {
    return Json{{"schema_version", 1},
                {"seed", seed},
                {"train", train},
                {"val", val},
                {"test", test}};
}

SplitManifest SplitManifest::from_json(const Json& j) {
    reject_unknown_keys(j, {"schema_version", "seed", "train", "val", "test"},
                        "split manifest");
    require_schema_version(j, 1, "split manifest");
    SplitManifest manifest;
    manifest.seed = j.at("seed").get<std::uint64_t>();
    manifest.train = j.at("train").get<std::vector<std::size_t>>();
    manifest.val = j.at("val").get<std::vector<std::size_t>>();
    manifest.test = j.at("test").get<std::vector<std::size_t>>();
    return manifest;
}

SplitManifest split(const std::vector<Sample>& samples, std::array<int, 3> ratio,
                    std::uint64_t seed) {
    if (samples.empty()) throw ConfigError("cannot split an empty sample list");
    for (int part : ratio)
        if (part < 0) throw ConfigError("split ratio parts must be non-negative");
    const int total_parts = ratio[0] + ratio[1] + ratio[2];
    if (total_parts <= 0) throw ConfigError("split ratio must have a positive total");

    // Scenario ids in first-appearance order, then a seeded Fisher-Yates pass
    // (hand-rolled so the permutation is identical on every platform).
    std::vector<std::string> scenario_order;
    std::map<std::string, std::size_t> scenario_part;
    for (const Sample& sample : samples) {
        if (!scenario_part.count(sample.scenario_id)) {
            scenario_part[sample.scenario_id] = 0;
            scenario_order.push_back(sample.scenario_id);
        }
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = scenario_order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(scenario_order[i - 1], scenario_order[j]);
    }

    const double count = static_cast<double>(scenario_order.size());
    const std::size_t cut1 = static_cast<std::size_t>(
        std::llround(count * ratio[0] / total_parts));
    const std::size_t cut2 = static_cast<std::size_t>(
        std::llround(count * (ratio[0] + ratio[1]) / total_parts));
    for (std::size_t i = 0; i < scenario_order.size(); ++i)
        scenario_part[scenario_order[i]] = i < cut1 ? 0 : (i < cut2 ? 1 : 2);

    SplitManifest manifest;
    manifest.seed = seed;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        switch (scenario_part.at(samples[i].scenario_id)) {
            case 0: manifest.train.push_back(i); break;
            case 1: manifest.val.push_back(i); break;
            default: manifest.test.push_back(i); break;
        }
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

void write_samples(const Dataset& dataset, const std::filesystem::path& dir,
                   const ArchiveOptions& options) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create archive directory '" + dir.string() + "'");
    if (!options.rasters_inline && options.scenarios_path.empty())
        throw ConfigError("non-inline archives need a scenarios_path to rebuild rasters");

    const DatasetMeta& meta = dataset.meta;
    Json manifest{{"schema_version", 1},
                  {"m", meta.m},
                  {"n", meta.n},
                  {"d", meta.d},
                  {"tick_seconds", kTickSeconds},
                  {"raster", raster_config_to_json(meta.raster)},
                  {"rasters_inline", options.rasters_inline}};
    if (!options.rasters_inline) manifest["scenarios_path"] = options.scenarios_path;

    const std::size_t pixels =
        static_cast<std::size_t>(meta.raster.height_px) * meta.raster.width_px;
    Json entries = Json::array();
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const Sample& sample = dataset.samples[i];
        Json entry{{"scenario_id", sample.scenario_id},
                   {"target_agent_id", sample.target_agent_id},
                   {"t_index", sample.t_index},
                   {"behavior", to_string(sample.behavior_label)},
                   {"history_positions", blob_name(i, "hist")},
                   {"future_positions", blob_name(i, "future")}};
        {
            std::vector<float> hist(sample.history_positions.begin(),
                                    sample.history_positions.end());
            write_f32_blob(dir / blob_name(i, "hist"), hist);
            std::vector<float> future(sample.future_positions.begin(),
                                      sample.future_positions.end());
            write_f32_blob(dir / blob_name(i, "future"), future);
        }
        if (options.rasters_inline) {
            if (sample.history_rasters.size() != static_cast<std::size_t>(meta.m))
                throw ShapeMismatch("sample " + std::to_string(i) + " has " +
                                    std::to_string(sample.history_rasters.size()) +
                                    " rasters, expected m=" + std::to_string(meta.m));
            std::vector<float> blob;
            blob.reserve(sample.history_rasters.size() * 2 * pixels);
            std::vector<double> timestamps;
            for (const EnvRaster& raster : sample.history_rasters) {
                if (raster.lra_channel.size() != pixels ||
                    raster.traffic_channel.size() != pixels)
                    throw ShapeMismatch("raster does not match the archive raster config");
                for (std::uint8_t v : raster.lra_channel) blob.push_back(static_cast<float>(v));
                for (std::uint8_t v : raster.traffic_channel)
                    blob.push_back(static_cast<float>(v));
                timestamps.push_back(raster.timestamp);
            }
            write_f32_blob(dir / blob_name(i, "rasters"), blob);
            entry["rasters"] = blob_name(i, "rasters");
            entry["raster_timestamps"] = timestamps;
        }
        entries.push_back(std::move(entry));
    }
    manifest["samples"] = std::move(entries);
    write_json_file(dir / "manifest.json", manifest);
}

Dataset read_samples(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    Json manifest = read_json_file(dir / "manifest.json");
    reject_unknown_keys(manifest,
                        {"schema_version", "m", "n", "d", "tick_seconds", "raster",
                         "rasters_inline", "scenarios_path", "samples"},
                        "dataset manifest");
    require_schema_version(manifest, 1, "dataset manifest");

    Dataset dataset;
    dataset.meta.m = manifest.at("m").get<int>();
    dataset.meta.n = manifest.at("n").get<int>();
    dataset.meta.d = manifest.at("d").get<double>();
    const double tick = manifest.at("tick_seconds").get<double>();
    if (std::abs(tick - kTickSeconds) > 1e-12)
        throw ConfigError("archive tick_seconds " + std::to_string(tick) +
                          " does not match the 0.4 s build");
    dataset.meta.raster = raster_config_from_json(manifest.at("raster"));
    const bool inline_rasters = manifest.at("rasters_inline").get<bool>();

    std::map<std::string, const Scenario*> scenario_by_id;
    std::vector<Scenario> scenarios;
    if (!inline_rasters) {
        fs::path ref = manifest.at("scenarios_path").get<std::string>();
        if (ref.is_relative()) ref = dir / ref;
        scenarios = read_scenarios_jsonl(ref);
        for (const Scenario& scenario : scenarios)
            scenario_by_id[scenario.scenario_id] = &scenario;
    }

    const std::size_t pixels =
        static_cast<std::size_t>(dataset.meta.raster.height_px) * dataset.meta.raster.width_px;
    const std::size_t m = static_cast<std::size_t>(dataset.meta.m);
    for (const Json& entry : manifest.at("samples")) {
        reject_unknown_keys(entry,
                            {"scenario_id", "target_agent_id", "t_index", "behavior",
                             "history_positions", "future_positions", "rasters",
                             "raster_timestamps"},
                            "dataset sample entry");
        Sample sample;
        sample.scenario_id = entry.at("scenario_id").get<std::string>();
        sample.target_agent_id = entry.at("target_agent_id").get<std::string>();
        sample.t_index = entry.at("t_index").get<std::size_t>();
        sample.behavior_label = behavior_from_string(entry.at("behavior").get<std::string>());
        sample.history_positions =
            read_f32_blob(dir / entry.at("history_positions").get<std::string>());
        sample.future_positions =
            read_f32_blob(dir / entry.at("future_positions").get<std::string>());
        if (sample.history_positions.size() != m * 2 ||
            sample.future_positions.size() != static_cast<std::size_t>(dataset.meta.n) * 2)
            throw ShapeMismatch("position blobs do not match the archive m/n");

        if (inline_rasters) {
            std::vector<float> blob = read_f32_blob(dir / entry.at("rasters").get<std::string>());
            if (blob.size() != m * 2 * pixels)
                throw ShapeMismatch("raster blob does not match the archive raster config");
            std::vector<double> timestamps =
                entry.at("raster_timestamps").get<std::vector<double>>();
            if (timestamps.size() != m)
                throw ShapeMismatch("raster timestamp list does not match m");
            for (std::size_t k = 0; k < m; ++k) {
                EnvRaster raster;
                raster.height_px = dataset.meta.raster.height_px;
                raster.width_px = dataset.meta.raster.width_px;
                raster.timestamp = timestamps[k];
                raster.lra_channel.reserve(pixels);
                raster.traffic_channel.reserve(pixels);
                const float* base = blob.data() + k * 2 * pixels;
                for (std::size_t p = 0; p < pixels; ++p)
                    raster.lra_channel.push_back(static_cast<std::uint8_t>(base[p]));
                for (std::size_t p = 0; p < pixels; ++p)
                    raster.traffic_channel.push_back(static_cast<std::uint8_t>(base[pixels + p]));
                sample.history_rasters.push_back(std::move(raster));
            }
        } else {
            auto it = scenario_by_id.find(sample.scenario_id);
            if (it == scenario_by_id.end())
                throw UnknownSample("scenario '" + sample.scenario_id +
                                    "' referenced by the archive is missing from the "
                                    "scenario file");
            const Scenario& scenario = *it->second;
            const AgentTrack* target = nullptr;
            for (const AgentTrack& track : scenario.tracks)
                if (track.agent_id == sample.target_agent_id) target = &track;
            if (!target)
                throw UnknownSample("agent '" + sample.target_agent_id +
                                    "' missing from scenario '" + sample.scenario_id + "'");
            auto history = build_history(scenario.graph, *target, scenario.tracks,
                                         sample.t_index, dataset.meta.m, dataset.meta.d,
                                         dataset.meta.raster);
            for (auto& [raster, world] : history) {
                (void)world;
                sample.history_rasters.push_back(std::move(raster));
            }
        }
        dataset.samples.push_back(std::move(sample));
    }
    return dataset;
}

}  // namespace sapi
