#include "sapi/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>

#include "sapi/plotting.hpp"

namespace sapi {

namespace fs = std::filesystem;

namespace {

std::string scenario_name(int index) {
    char buffer[24];
    std::snprintf(buffer, sizeof(buffer), "s%05d", index);
    return buffer;
}

Json points_json(const std::vector<double>& flat) {
    Json points = Json::array();
    for (std::size_t i = 0; i < flat.size() / 2; ++i)
        points.push_back(Json::array({flat[2 * i], flat[2 * i + 1]}));
    return points;
}

std::vector<float> points_from_json(const Json& j, const std::string& what) {
    std::vector<float> flat;
    if (!j.is_array()) throw ConfigError(what + " must be an array of [x, y] pairs");
    for (const Json& p : j) {
        if (!p.is_array() || p.size() != 2)
            throw ConfigError(what + " must be an array of [x, y] pairs");
        flat.push_back(p.at(0).get<float>());
        flat.push_back(p.at(1).get<float>());
    }
    return flat;
}

struct LoadedSplits {
    Dataset dataset;
    SplitManifest manifest;
};

LoadedSplits load_dataset_and_split(const RunConfig& config) {
    fs::path dir = config.dataset_dir;
    if (!fs::exists(dir / "manifest.json"))
        throw ConfigError("dataset archive not found in " + dir.string() +
                          " (run build-dataset first)");
    LoadedSplits loaded;
    loaded.dataset = read_samples(dir);
    if (!fs::exists(dir / "split.json"))
        throw ConfigError("split manifest missing in " + dir.string());
    loaded.manifest = SplitManifest::from_json(read_json_file(dir / "split.json"));
    std::size_t count = loaded.dataset.samples.size();
    for (const auto* part : {&loaded.manifest.train, &loaded.manifest.val,
                             &loaded.manifest.test})
        for (std::size_t index : *part)
            if (index >= count)
                throw ConfigError("split manifest references sample " +
                                  std::to_string(index) + " outside the archive");
    return loaded;
}

std::vector<Sample> take_subset(std::vector<Sample>& samples,
                                const std::vector<std::size_t>& indices) {
    std::vector<Sample> subset;
    subset.reserve(indices.size());
    for (std::size_t index : indices) subset.push_back(std::move(samples[index]));
    return subset;
}

fs::path checkpoint_dir_for(const RunConfig& config, ModelKind kind) {
    return fs::path(config.checkpoint_dir) / to_string(kind);
}

LoadedModel load_checkpoint_for(const RunConfig& config, ModelKind kind) {
    fs::path dir = checkpoint_dir_for(config, kind);
    if (!fs::exists(dir / "manifest.json"))
        throw MissingCheckpoint("no checkpoint for " + std::string(to_string(kind)) +
                                " under " + dir.string());
    LoadedModel loaded = load_checkpoint(dir);
    if (loaded.kind != kind)
        throw ConfigError("checkpoint in " + dir.string() + " holds " +
                          to_string(loaded.kind) + ", expected " + to_string(kind));
    return loaded;
}

void check_model_matches_dataset(const ModelConfig& model, const DatasetMeta& meta) {
    if (model.m != meta.m || model.n != meta.n)
        throw ConfigError("checkpoint m/n does not match the dataset");
    if (model.raster_h != meta.raster.height_px || model.raster_w != meta.raster.width_px)
        throw ConfigError("checkpoint raster dims do not match the dataset");
}

}  // namespace

int cmd_generate(const RunConfig& config, std::ostream& out) {
    fs::path path = config.scenarios_path;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::vector<Scenario> scenarios;
    scenarios.reserve(static_cast<std::size_t>(config.scenario_count));
    std::map<Behavior, std::size_t> behaviors;
    for (int i = 0; i < config.scenario_count; ++i) {
        ScenarioSpec spec = config.scenario;
        spec.seed = config.scenario.seed + static_cast<std::uint64_t>(i);
        scenarios.push_back(generate_scenario(spec, scenario_name(i)));
        for (const AgentTrack& track : scenarios.back().tracks)
            ++behaviors[track.behavior_label];
    }
    write_scenarios_jsonl(path, scenarios);
    out << "wrote " << scenarios.size() << " scenarios to " << path.string() << "\n";
    for (const auto& [behavior, count] : behaviors)
        out << "  " << to_string(behavior) << ": " << count << " agents\n";
    return 0;
}

int cmd_build_dataset(const RunConfig& config, std::ostream& out) {
    fs::path scenarios_path = config.scenarios_path;
    if (!fs::exists(scenarios_path))
        throw ConfigError("scenario file not found: " + scenarios_path.string());
    std::vector<Scenario> scenarios = read_scenarios_jsonl(scenarios_path);

    std::size_t skipped = 0;
    Dataset dataset = build_dataset(scenarios, config.dataset, &skipped);
    if (dataset.samples.empty())
        throw ConfigError("no samples could be extracted (tracks shorter than m+n?)");
    SplitManifest manifest = split(dataset.samples, config.split_ratio, config.split_seed);

    ArchiveOptions options;
    options.rasters_inline = config.rasters_inline;
    if (!options.rasters_inline) {
        std::error_code ec;
        fs::path rel = fs::proximate(scenarios_path, config.dataset_dir, ec);
        options.scenarios_path = ec ? fs::absolute(scenarios_path).string() : rel.string();
    }
    write_samples(dataset, config.dataset_dir, options);
    write_json_file(fs::path(config.dataset_dir) / "split.json", manifest.to_json());

    out << "scenarios: " << scenarios.size() << "\n"
        << "samples: " << dataset.samples.size() << " (skipped " << skipped << " off-road)\n"
        << "split " << config.split_ratio[0] << "/" << config.split_ratio[1] << "/"
        << config.split_ratio[2] << ": train " << manifest.train.size() << ", val "
        << manifest.val.size() << ", test " << manifest.test.size() << "\n"
        << "archive: " << config.dataset_dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
    LoadedSplits loaded = load_dataset_and_split(config);
    check_model_matches_dataset(config.model, loaded.dataset.meta);
    std::vector<Sample> val = take_subset(loaded.dataset.samples, loaded.manifest.val);
    std::vector<Sample> train_set =
        take_subset(loaded.dataset.samples, loaded.manifest.train);
    out << "training " << to_string(config.model_kind) << " on " << train_set.size()
        << " samples (val " << val.size() << ")\n";

    TrainResult result = train(config.model_kind, train_set, val, config.train,
                               config.model, [&](const EpochLog& entry) {
                                   char line[160];
                                   std::snprintf(line, sizeof(line),
                                                 "epoch %3d  train %.4f  val %.4f  ade %.4f\n",
                                                 entry.epoch, entry.train_loss,
                                                 entry.val_loss, entry.val_ade);
                                   out << line << std::flush;
                                   return true;
                               });

    fs::path dir = checkpoint_dir_for(config, config.model_kind);
    save_checkpoint(dir, result.params, config.model_kind, config.model,
                    config.train.seed);
    write_training_log_csv(dir / "training_log.csv", result.log);
    out << "best epoch " << result.best_epoch << " (val ade " << result.best_val_ade
        << "); checkpoint: " << dir.string() << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& config, bool all_kinds, std::ostream& out) {
    LoadedSplits loaded = load_dataset_and_split(config);
    std::vector<Sample> test = take_subset(loaded.dataset.samples, loaded.manifest.test);
    if (test.empty()) throw ConfigError("test split is empty");

    std::vector<ModelKind> kinds;
    if (all_kinds)
        kinds = {ModelKind::lstm, ModelKind::sapi_no_lra, ModelKind::sapi_no_traffic,
                 ModelKind::sapi};
    else
        kinds = {config.model_kind};

    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    char line[200];
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %10s %10s %10s\n", "model",
                  "4s fde", "4s std", "6s fde", "6s std", "6s ade");
    out << line;
    for (ModelKind kind : kinds) {
        LoadedModel model = load_checkpoint_for(config, kind);
        check_model_matches_dataset(model.config, loaded.dataset.meta);
        EvalReport report = evaluate(kind, model.params, model.config, test);
        write_json_file(fs::path(config.out_dir) /
                            ("eval_" + std::string(to_string(kind)) + ".json"),
                        report.to_json());
        std::snprintf(line, sizeof(line), "%-16s %10.3f %10.3f %10.3f %10.3f %10.3f\n",
                      to_string(kind), report.fde_4s, report.fde_4s_std, report.fde_6s,
                      report.fde_6s_std, report.ade_6s);
        out << line;
    }
    out << "reports: " << config.out_dir << "\n";
    return 0;
}

int cmd_predict(const RunConfig& config, const std::string& sample_ref, std::ostream& out) {
    LoadedSplits loaded = load_dataset_and_split(config);
    const std::vector<Sample>& samples = loaded.dataset.samples;

    std::size_t index = samples.size();
    std::size_t colon = sample_ref.find(':');
    if (colon == std::string::npos) {
        try {
            index = static_cast<std::size_t>(std::stoull(sample_ref));
        } catch (const std::exception&) {
            throw UnknownSample("sample reference '" + sample_ref +
                                "' is neither an index nor scenario:agent:t");
        }
        if (index >= samples.size())
            throw UnknownSample("sample index " + sample_ref + " outside 0.." +
                                std::to_string(samples.size() - 1));
    } else {
        std::size_t colon2 = sample_ref.find(':', colon + 1);
        if (colon2 == std::string::npos)
            throw UnknownSample("expected scenario:agent:t, got '" + sample_ref + "'");
        std::string scenario_id = sample_ref.substr(0, colon);
        std::string agent = sample_ref.substr(colon + 1, colon2 - colon - 1);
        std::size_t t = 0;
        try {
            t = static_cast<std::size_t>(std::stoull(sample_ref.substr(colon2 + 1)));
        } catch (const std::exception&) {
            throw UnknownSample("bad t_index in '" + sample_ref + "'");
        }
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].scenario_id == scenario_id &&
                samples[i].target_agent_id == agent && samples[i].t_index == t)
                index = i;
        if (index == samples.size())
            throw UnknownSample("no sample " + sample_ref + " in the archive");
    }

    LoadedModel model = load_checkpoint_for(config, config.model_kind);
    check_model_matches_dataset(model.config, loaded.dataset.meta);
    const Sample& sample = samples[index];
    std::vector<double> prediction =
        model_forward(model.kind, sample, model.params, model.config);
    std::vector<double> gt = widen(sample.future_positions);
    std::vector<double> linear =
        constant_velocity_prediction(sample.history_positions, model.config.n);

    double ade = 0.0;
    for (int k = 1; k <= model.config.n; ++k) ade += displacement_error(prediction, gt, k);
    ade /= model.config.n;
    double fde = displacement_error(prediction, gt, model.config.n);

    Json dump{{"schema_version", 1},
              {"scenario_id", sample.scenario_id},
              {"target_agent_id", sample.target_agent_id},
              {"t_index", sample.t_index},
              {"behavior_label", to_string(sample.behavior_label)},
              {"model_kind", to_string(model.kind)},
              {"history", points_json(widen(sample.history_positions))},
              {"ground_truth", points_json(gt)},
              {"prediction", points_json(prediction)},
              {"linear_reference", points_json(linear)},
              {"ade_6s", ade},
              {"fde_6s", fde}};
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    std::string ref_name = sample_ref;
    std::replace(ref_name.begin(), ref_name.end(), ':', '_');
    fs::path path = fs::path(config.out_dir) / ("prediction_" + ref_name + ".json");
    write_json_file(path, dump);
    out << "sample " << index << " (" << sample.scenario_id << ":"
        << sample.target_agent_id << ":" << sample.t_index << ", "
        << to_string(sample.behavior_label) << ")\n"
        << "ade " << ade << " m, fde " << fde << " m\n"
        << "dump: " << path.string() << "\n";
    return 0;
}

int cmd_plot(const RunConfig& config, const std::vector<std::string>& report_paths,
             const std::vector<std::string>& prediction_paths, std::ostream& out) {
    if (report_paths.empty() && prediction_paths.empty()) {
        out << "warning: nothing to plot (no reports, no predictions)\n";
        return 0;
    }
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);

    if (!report_paths.empty()) {
        std::vector<CurveSeries> series;
        for (const std::string& report_path : report_paths) {
            if (!fs::exists(report_path))
                throw ConfigError("report not found: " + report_path);
            EvalReport report = EvalReport::from_json(read_json_file(report_path));
            std::string label = fs::path(report_path).stem().string();
            if (label.rfind("eval_", 0) == 0) label = label.substr(5);
            series.push_back({label, report.per_step_errors});
        }
        fs::path path = fs::path(config.out_dir) / "per_step_error.png";
        plot_error_curves(series, path);
        out << "curve: " << path.string() << "\n";
    }

    if (!prediction_paths.empty()) {
        if (!fs::exists(config.scenarios_path))
            throw ConfigError("scenario file not found: " + config.scenarios_path +
                              " (overlays need the lane graphs)");
        std::vector<Scenario> scenarios = read_scenarios_jsonl(config.scenarios_path);
        for (const std::string& prediction_path : prediction_paths) {
            if (!fs::exists(prediction_path))
                throw ConfigError("prediction dump not found: " + prediction_path);
            Json dump = read_json_file(prediction_path);
            require_schema_version(dump, 1, "prediction dump");

            Sample sample;
            sample.scenario_id = dump.at("scenario_id").get<std::string>();
            sample.target_agent_id = dump.at("target_agent_id").get<std::string>();
            sample.t_index = dump.at("t_index").get<std::size_t>();
            sample.history_positions = points_from_json(dump.at("history"), "history");
            sample.future_positions =
                points_from_json(dump.at("ground_truth"), "ground_truth");
            std::vector<float> pred_f =
                points_from_json(dump.at("prediction"), "prediction");
            std::vector<double> prediction = widen(pred_f);

            const Scenario* scenario = nullptr;
            for (const Scenario& s : scenarios)
                if (s.scenario_id == sample.scenario_id) scenario = &s;
            if (!scenario)
                throw UnknownSample("scenario " + sample.scenario_id + " not in " +
                                    config.scenarios_path);

            fs::path path = fs::path(config.out_dir) /
                            ("overlay_" + fs::path(prediction_path).stem().string() +
                             ".png");
            plot_scenario_overlay(*scenario, sample, prediction, path);
            out << "overlay: " << path.string() << "\n";
        }
    }
    return 0;
}

}  // namespace sapi
