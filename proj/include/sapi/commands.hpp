#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "sapi/run_config.hpp"

namespace sapi {

// Subcommand bodies. Each returns 0 on success and reports progress on `out`;
// failures are raised as sapi errors (the CLI maps validation/usage errors to
// exit 2 and everything else to exit 1).

// Writes scenario_count scenarios (seeds scenario.seed, +1 each) as JSONL.
int cmd_generate(const RunConfig& config, std::ostream& out);

// Scenario JSONL -> sample archive + split manifest in dataset_dir.
int cmd_build_dataset(const RunConfig& config, std::ostream& out);

// Trains config.model_kind; checkpoint + CSV log land in
// checkpoint_dir/<kind>/.
int cmd_train(const RunConfig& config, std::ostream& out);

// Test-split metrics for one kind, or for all four (comparison table) with
// --all. Reports are also written to out_dir/eval_<kind>.json.
int cmd_evaluate(const RunConfig& config, bool all_kinds, std::ostream& out);

// One sample (by archive index, or scenario_id:agent_id:t_index) through the
// trained model; writes out_dir/prediction_<ref>.json.
int cmd_predict(const RunConfig& config, const std::string& sample_ref, std::ostream& out);

// Per-step error curves from EvalReport JSONs and/or bird's-eye overlays from
// prediction dumps.
int cmd_plot(const RunConfig& config, const std::vector<std::string>& report_paths,
             const std::vector<std::string>& prediction_paths, std::ostream& out);

}  // namespace sapi
