#include <doctest.h>

#include <fstream>

#include "sapi/run_config.hpp"
#include "support/test_support.hpp"

using namespace sapi;

TEST_SUITE("run_config") {

TEST_CASE("defaults validate and round-trip through json") {
    RunConfig config;
    CHECK_NOTHROW(config.validate());
    Json j = config.to_json();
    RunConfig back = RunConfig::from_json(j);
    CHECK(back.to_json().dump() == j.dump());

    RunConfig empty = RunConfig::from_json(Json::object());
    CHECK(empty.to_json().dump() == j.dump());
    CHECK(empty.scenario_count == 100);
    CHECK(empty.split_ratio == std::array<int, 3>{3, 1, 1});
    CHECK(empty.model_kind == ModelKind::sapi);
    CHECK(empty.dataset_dir == "dataset");
}

TEST_CASE("cross-stage consistency is enforced") {
    auto reject = [](const Json& j) { CHECK_THROWS_AS(RunConfig::from_json(j), ConfigError); };
    reject(Json{{"scenario_count", -1}});
    reject(Json{{"dataset", {{"m", 1}}}});
    reject(Json{{"dataset", {{"n", 0}}}});
    reject(Json{{"dataset", {{"d", 0.0}}}});
    reject(Json{{"dataset", {{"split_ratio", {0, 0, 0}}}}});
    reject(Json{{"model", {{"m", 10}}}});  // model window no longer matches the dataset
    reject(Json{{"dataset",
                 {{"raster",
                   {{"height_px", 96}, {"width_px", 96}, {"resolution", 1.0}}}}}});
    reject(Json{{"paths", {{"out", ""}}}});
    reject(Json{{"mystery", 1}});
    reject(Json{{"dataset", {{"mystery", 1}}}});
    reject(Json{{"paths", {{"mystery", "x"}}}});

    // Consistent override of every coupled field is accepted.
    Json ok{{"dataset",
             {{"m", 4},
              {"n", 2},
              {"raster", {{"height_px", 16}, {"width_px", 16}, {"resolution", 1.0}}}}},
            {"model", {{"m", 4}, {"n", 2}, {"raster_h", 16}, {"raster_w", 16}, {"pool_h", 4},
                       {"pool_w", 4}}}};
    RunConfig small = RunConfig::from_json(ok);
    CHECK(small.model.m == 4);
    CHECK(small.dataset.raster.height_px == 16);
}

TEST_CASE("dotted overrides create structure and parse leaf types") {
    Json tree = Json::object();
    apply_override(tree, "train.batch_size", "8");
    CHECK(tree["train"]["batch_size"] == 8);
    apply_override(tree, "dataset.rasters_inline", "false");
    CHECK(tree["dataset"]["rasters_inline"] == false);
    apply_override(tree, "dataset.split_ratio", "[2,1,1]");
    CHECK(tree["dataset"]["split_ratio"] == Json::array({2, 1, 1}));
    apply_override(tree, "model_kind", "lstm");
    CHECK(tree["model_kind"] == "lstm");  // unparsable as JSON stays a string
    apply_override(tree, "train.learning_rate", "0.01");
    CHECK(tree["train"]["learning_rate"] == 0.01);
    apply_override(tree, "paths.out", "runs/a=b");
    CHECK(tree["paths"]["out"] == "runs/a=b");

    // A scalar in the middle of the path is replaced by an object.
    Json scalar{{"a", 5}};
    apply_override(scalar, "a.b", "1");
    CHECK(scalar["a"]["b"] == 1);

    CHECK_THROWS_AS(apply_override(tree, "", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(tree, "a..b", "1"), ConfigError);
}

TEST_CASE("config files and overrides merge in order") {
    support::TempDir tmp("runcfg");
    Json file_cfg{{"scenario_count", 7}, {"train", {{"max_epochs", 3}}}};
    write_json_file(tmp / "cfg.json", file_cfg);

    RunConfig loaded = load_run_config((tmp / "cfg.json").string(), {});
    CHECK(loaded.scenario_count == 7);
    CHECK(loaded.train.max_epochs == 3);
    CHECK(loaded.train.batch_size == 64);  // untouched fields keep defaults

    RunConfig overridden = load_run_config(
        (tmp / "cfg.json").string(),
        {"scenario_count=9", "train.batch_size=8", "train.batch_size=16", "model_kind=lstm"});
    CHECK(overridden.scenario_count == 9);  // override beats the file
    CHECK(overridden.train.batch_size == 16);  // last override wins
    CHECK(overridden.train.max_epochs == 3);   // file value survives
    CHECK(overridden.model_kind == ModelKind::lstm);

    RunConfig bare = load_run_config("", {"scenario_count=5"});
    CHECK(bare.scenario_count == 5);

    CHECK_THROWS_AS(load_run_config((tmp / "absent.json").string(), {}), ConfigError);
    {
        std::ofstream bad(tmp / "bad.json");
        bad << "{not json";
    }
    CHECK_THROWS_AS(load_run_config((tmp / "bad.json").string(), {}), ConfigError);
    {
        std::ofstream arr(tmp / "arr.json");
        arr << "[1, 2]";
    }
    CHECK_THROWS_AS(load_run_config((tmp / "arr.json").string(), {}), ConfigError);
    CHECK_THROWS_AS(load_run_config("", {"no_equals_sign"}), ConfigError);
    CHECK_THROWS_AS(load_run_config("", {"unknown_key=1"}), ConfigError);
    CHECK_THROWS_AS(load_run_config("", {"train.mystery=1"}), ConfigError);
}

}  // TEST_SUITE
