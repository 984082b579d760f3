#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sapi/commands.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--set", args.overrides,
                    "override a config value, key.path=value (repeatable)");
    cmd->add_option("--seed", args.seed, "override every seed in the config")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--out", args.out_dir, "override the output directory");
}

sapi::RunConfig build_config(const CommonArgs& args) {
    std::vector<std::string> overrides = args.overrides;
    if (args.seed_given) {
        std::string seed = std::to_string(args.seed);
        overrides.push_back("scenario.seed=" + seed);
        overrides.push_back("train.seed=" + seed);
        overrides.push_back("dataset.split_seed=" + seed);
    }
    if (!args.out_dir.empty())
        overrides.push_back("paths.out=" + sapi::Json(args.out_dir).dump());
    return sapi::load_run_config(args.config_path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sapilab: synthetic scenario generation, rasterized scene encoding, and "
                 "trajectory prediction models"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string sample_ref;
    bool all_kinds = false;
    std::vector<std::string> report_paths, prediction_paths;

    CLI::App* generate =
        app.add_subcommand("generate", "write synthetic intersection scenarios (JSONL)");
    add_common(generate, args);
    CLI::App* build =
        app.add_subcommand("build-dataset", "slice scenarios into a sample archive + split");
    add_common(build, args);
    CLI::App* train = app.add_subcommand("train", "train the configured model kind");
    add_common(train, args);
    CLI::App* evaluate = app.add_subcommand("evaluate", "test-split metrics for a checkpoint");
    add_common(evaluate, args);
    evaluate->add_flag("--all", all_kinds, "evaluate all four model kinds as one table");
    CLI::App* predict =
        app.add_subcommand("predict", "run one archived sample through a checkpoint");
    add_common(predict, args);
    predict->add_option("sample", sample_ref, "archive index or scenario:agent:t")
        ->required();
    CLI::App* plot = app.add_subcommand("plot", "render error curves and overlays as PNG");
    add_common(plot, args);
    plot->add_option("--report", report_paths, "evaluation report JSON (repeatable)");
    plot->add_option("--prediction", prediction_paths, "prediction dump JSON (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return 2;
    }

    try {
        sapi::RunConfig config = build_config(args);
        if (generate->parsed()) return sapi::cmd_generate(config, std::cout);
        if (build->parsed()) return sapi::cmd_build_dataset(config, std::cout);
        if (train->parsed()) return sapi::cmd_train(config, std::cout);
        if (evaluate->parsed()) return sapi::cmd_evaluate(config, all_kinds, std::cout);
        if (predict->parsed()) return sapi::cmd_predict(config, sample_ref, std::cout);
        if (plot->parsed())
            return sapi::cmd_plot(config, report_paths, prediction_paths, std::cout);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const sapi::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sapi::MissingCheckpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sapi::UnknownSample& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
