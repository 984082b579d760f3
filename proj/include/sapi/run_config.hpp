#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "sapi/dataset.hpp"
#include "sapi/model.hpp"
#include "sapi/train_eval.hpp"

namespace sapi {

// One JSON document configures every pipeline stage. Any section may be
// omitted (defaults apply); unknown keys anywhere are rejected.
struct RunConfig {
    // generate
    ScenarioSpec scenario;  // template; per-scenario seeds derive from its seed
    int scenario_count = 100;

    // build-dataset
    DatasetMeta dataset;
    std::array<int, 3> split_ratio = {3, 1, 1};
    std::uint64_t split_seed = 0;
    bool rasters_inline = true;

    // train / evaluate / predict
    ModelKind model_kind = ModelKind::sapi;
    ModelConfig model;
    TrainConfig train;

    // paths (relative paths are taken as given, resolved by the caller's cwd)
    std::string scenarios_path = "scenarios.jsonl";
    std::string dataset_dir = "dataset";
    std::string checkpoint_dir = "checkpoint";
    std::string out_dir = "out";

    void validate() const;
    Json to_json() const;
    static RunConfig from_json(const Json& j);
};

// Sets `tree[dotted.path] = value`, creating intermediate objects. The value
// text is parsed as JSON when possible, otherwise kept as a string, so
// numbers, bools and arrays all work from the command line.
void apply_override(Json& tree, const std::string& dotted_path, const std::string& value);

// Config file (optional) + "key.path=value" overrides -> validated RunConfig.
RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides);

}  // namespace sapi
