#include "sapi/run_config.hpp"

namespace sapi {

void RunConfig::validate() const {
    scenario.validate();
    if (scenario_count < 0) throw ConfigError("scenario_count must be >= 0");
    if (dataset.m < 2) throw ConfigError("dataset m must be >= 2");
    if (dataset.n < 1) throw ConfigError("dataset n must be >= 1");
    if (!(dataset.d > 0.0)) throw ConfigError("search depth d must be positive");
    dataset.raster.validate();
    if (split_ratio[0] < 0 || split_ratio[1] < 0 || split_ratio[2] < 0 ||
        split_ratio[0] + split_ratio[1] + split_ratio[2] <= 0)
        throw ConfigError("split_ratio parts must be >= 0 with a positive sum");
    model.validate();
    train.validate();
    if (model.m != dataset.m || model.n != dataset.n)
        throw ConfigError("model m/n must match dataset m/n");
    if (model.raster_h != dataset.raster.height_px ||
        model.raster_w != dataset.raster.width_px)
        throw ConfigError("model raster dims must match the dataset raster config");
    if (scenarios_path.empty() || dataset_dir.empty() || checkpoint_dir.empty() ||
        out_dir.empty())
        throw ConfigError("paths must be non-empty");
}

Json RunConfig::to_json() const {
    return Json{{"scenario", scenario.to_json()},
                {"scenario_count", scenario_count},
                {"dataset",
                 {{"m", dataset.m},
                  {"n", dataset.n},
                  {"d", dataset.d},
                  {"raster", raster_config_to_json(dataset.raster)},
                  {"split_ratio", split_ratio},
                  {"split_seed", split_seed},
                  {"rasters_inline", rasters_inline}}},
                {"model_kind", to_string(model_kind)},
                {"model", model.to_json()},
                {"train", train.to_json()},
                {"paths",
                 {{"scenarios", scenarios_path},
                  {"dataset", dataset_dir},
                  {"checkpoint", checkpoint_dir},
                  {"out", out_dir}}}};
}

RunConfig RunConfig::from_json(const Json& j) {
    reject_unknown_keys(
        j, {"scenario", "scenario_count", "dataset", "model_kind", "model", "train", "paths"},
        "run config");
    RunConfig config;
    if (j.contains("scenario")) config.scenario = ScenarioSpec::from_json(j.at("scenario"));
    config.scenario_count = j.value("scenario_count", config.scenario_count);
    if (j.contains("dataset")) {
        const Json& d = j.at("dataset");
        reject_unknown_keys(
            d, {"m", "n", "d", "raster", "split_ratio", "split_seed", "rasters_inline"},
            "dataset config");
        config.dataset.m = d.value("m", config.dataset.m);
        config.dataset.n = d.value("n", config.dataset.n);
        config.dataset.d = d.value("d", config.dataset.d);
        if (d.contains("raster"))
            config.dataset.raster = raster_config_from_json(d.at("raster"));
        config.split_ratio = d.value("split_ratio", config.split_ratio);
        config.split_seed = d.value("split_seed", config.split_seed);
        config.rasters_inline = d.value("rasters_inline", config.rasters_inline);
    }
    if (j.contains("model_kind"))
        config.model_kind = model_kind_from_string(j.at("model_kind").get<std::string>());
    if (j.contains("model")) config.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("train")) config.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("paths")) {
        const Json& p = j.at("paths");
        reject_unknown_keys(p, {"scenarios", "dataset", "checkpoint", "out"}, "paths");
        config.scenarios_path = p.value("scenarios", config.scenarios_path);
        config.dataset_dir = p.value("dataset", config.dataset_dir);
        config.checkpoint_dir = p.value("checkpoint", config.checkpoint_dir);
        config.out_dir = p.value("out", config.out_dir);
    }
    config.validate();
    return config;
}

void apply_override(Json& tree, const std::string& dotted_path, const std::string& value) {
    if (dotted_path.empty()) throw ConfigError("override path is empty");
    Json* node = &tree;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = dotted_path.find('.', start);
        std::string key = dotted_path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("override path '" + dotted_path +
                                           "' has an empty component");
        if (dot == std::string::npos) {
            Json parsed = Json::parse(value, nullptr, /*allow_exceptions=*/false);
            (*node)[key] = parsed.is_discarded() ? Json(value) : parsed;
            return;
        }
        if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = Json::object();
        node = &(*node)[key];
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    Json tree = Json::object();
    if (!config_path.empty()) {
        try {
            tree = read_json_file(config_path);
        } catch (const Error& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        if (!tree.is_object()) throw ConfigError("config file must hold a JSON object");
    }
    for (const std::string& entry : overrides) {
        std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + entry + "' is not key.path=value");
        apply_override(tree, entry.substr(0, eq), entry.substr(eq + 1));
    }
    return RunConfig::from_json(tree);
}

}  // namespace sapi
