#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "sapi/model.hpp"

namespace sapi {

struct TrainConfig {
    double learning_rate = 0.003;
    double huber_r = 3.0;
    int batch_size = 64;
    int max_epochs = 100;
    int patience = 10;  // epochs without val-ADE improvement before stopping
    std::uint64_t seed = 0;

    void validate() const;
    Json to_json() const;
    static TrainConfig from_json(const Json& j);
};

// float32 tensor (archive layout) -> double (math layout).
std::vector<double> widen(const std::vector<float>& x);

// Piecewise displacement loss summed over prediction steps. Per step with
// error magnitude e = |gt_i - pred_i|: e^2/(2r) when e < r, else e - r.
double huber_loss(const std::vector<double>& pred, const std::vector<double>& gt, double r);

// d(huber_loss)/d(pred), same layout as pred.
std::vector<double> huber_loss_grad(const std::vector<double>& pred,
                                    const std::vector<double>& gt, double r);

// Euclidean error at 1-based step k of an (n,2) prediction.
double displacement_error(const std::vector<double>& pred, const std::vector<double>& gt,
                          int k);

// Linear-motion reference: repeats the displacement between the last two
// observed positions for n more steps, starting from the last one.
std::vector<double> constant_velocity_prediction(const std::vector<float>& history_positions,
                                                 int n);

struct EvalReport {
    double ade_6s = 0.0;
    double fde_4s = 0.0;
    double fde_4s_std = 0.0;
    double fde_6s = 0.0;
    double fde_6s_std = 0.0;
    std::vector<double> per_step_errors;  // mean error per step, n values

    Json to_json() const;
    static EvalReport from_json(const Json& j);
};

// Mean/std displacement metrics over a sample set. The 4 s horizon is step 10
// (clamped to n for short-horizon configs), the 6 s horizon is the last step;
// stds are population standard deviations over samples.
EvalReport evaluate(ModelKind kind, const ParamSet& params, const ModelConfig& config,
                    const std::vector<Sample>& samples);

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_ade = 0.0;
};

struct TrainResult {
    ParamSet params;  // weights from the best validation epoch
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_val_ade = 0.0;
};

// Mini-batch training with adaptive-moment updates, per-epoch shuffling,
// early stopping on validation ADE. Deterministic in the seed. Throws
// DivergenceDetected the moment a batch loss or any weight goes non-finite.
// on_epoch (optional) sees every epoch's log entry; returning false stops
// training after that epoch.
TrainResult train(ModelKind kind, const std::vector<Sample>& train_samples,
                  const std::vector<Sample>& val_samples, const TrainConfig& train_config,
                  const ModelConfig& model_config,
                  const std::function<bool(const EpochLog&)>& on_epoch = {});

// CSV with header epoch,train_loss,val_loss,val_ade.
void write_training_log_csv(const std::filesystem::path& path,
                            const std::vector<EpochLog>& log);

}  // namespace sapi
