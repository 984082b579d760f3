#include "sapi/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

namespace sapi {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(huber_r > 0.0)) throw ConfigError("huber_r must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 0) throw ConfigError("patience must be >= 0");
}

Json TrainConfig::to_json() const {
    return Json{{"learning_rate", learning_rate}, {"huber_r", huber_r},
                {"batch_size", batch_size},       {"max_epochs", max_epochs},
                {"patience", patience},           {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const Json& j) {
    reject_unknown_keys(
        j, {"learning_rate", "huber_r", "batch_size", "max_epochs", "patience", "seed"},
        "train config");
    TrainConfig config;
    config.learning_rate = j.value("learning_rate", config.learning_rate);
    config.huber_r = j.value("huber_r", config.huber_r);
    config.batch_size = j.value("batch_size", config.batch_size);
    config.max_epochs = j.value("max_epochs", config.max_epochs);
    config.patience = j.value("patience", config.patience);
    config.seed = j.value("seed", config.seed);
    config.validate();
    return config;
}

std::vector<double> widen(const std::vector<float>& x) {
    return std::vector<double>(x.begin(), x.end());
}

namespace {

void check_pair(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size() || pred.empty() || pred.size() % 2)
        throw ShapeMismatch("prediction and ground truth must both be (n,2)");
}

double step_error(const std::vector<double>& pred, const std::vector<double>& gt,
                  std::size_t i) {
    double dx = gt[2 * i] - pred[2 * i];
    double dy = gt[2 * i + 1] - pred[2 * i + 1];
    return std::hypot(dx, dy);
}

}  // namespace

double huber_loss(const std::vector<double>& pred, const std::vector<double>& gt, double r) {
    check_pair(pred, gt);
    if (!(r > 0.0)) throw ConfigError("loss threshold r must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size() / 2; ++i) {
        double e = step_error(pred, gt, i);
        total += e < r ? e * e / (2.0 * r) : e - r;
    }
    return total;
}

std::vector<double> huber_loss_grad(const std::vector<double>& pred,
                                    const std::vector<double>& gt, double r) {
    check_pair(pred, gt);
    if (!(r > 0.0)) throw ConfigError("loss threshold r must be positive");
    std::vector<double> g(pred.size(), 0.0);
    for (std::size_t i = 0; i < pred.size() / 2; ++i) {
        double dx = pred[2 * i] - gt[2 * i];
        double dy = pred[2 * i + 1] - gt[2 * i + 1];
        double e = std::hypot(dx, dy);
        // Quadratic branch: d/dp of e^2/(2r) = (p - g)/r. Linear branch:
        // d/dp of e - r = (p - g)/e; e >= r > 0 there, so no 0/0.
        double scale = e < r ? 1.0 / r : 1.0 / e;
        g[2 * i] = dx * scale;
        g[2 * i + 1] = dy * scale;
    }
    return g;
}

double displacement_error(const std::vector<double>& pred, const std::vector<double>& gt,
                          int k) {
    check_pair(pred, gt);
    int n = static_cast<int>(pred.size() / 2);
    if (k < 1 || k > n)
        throw IndexOutOfRange("step " + std::to_string(k) + " outside 1.." +
                              std::to_string(n));
    return step_error(pred, gt, static_cast<std::size_t>(k - 1));
}

std::vector<double> constant_velocity_prediction(const std::vector<float>& history_positions,
                                                 int n) {
    if (history_positions.size() < 4 || history_positions.size() % 2)
        throw ShapeMismatch("need at least two (x,y) history positions");
    if (n < 1) throw ShapeMismatch("n must be >= 1");
    std::size_t m = history_positions.size() / 2;
    double lx = history_positions[2 * (m - 1)], ly = history_positions[2 * (m - 1) + 1];
    double vx = lx - history_positions[2 * (m - 2)];
    double vy = ly - history_positions[2 * (m - 2) + 1];
    std::vector<double> pred(static_cast<std::size_t>(n) * 2);
    for (int k = 1; k <= n; ++k) {
        pred[2 * static_cast<std::size_t>(k - 1)] = lx + k * vx;
        pred[2 * static_cast<std::size_t>(k - 1) + 1] = ly + k * vy;
    }
    return pred;
}

EvalReport evaluate(ModelKind kind, const ParamSet& params, const ModelConfig& config,
                    const std::vector<Sample>& samples) {
    if (samples.empty()) throw ConfigError("evaluation sample set must be non-empty");
    const int n = config.n;
    const int step4 = std::min(10, n);  // 4 s at 0.4 s ticks
    std::vector<double> sum_per_step(static_cast<std::size_t>(n), 0.0);
    double sum4 = 0.0, sumsq4 = 0.0, sum6 = 0.0, sumsq6 = 0.0;
    for (const Sample& sample : samples) {
        std::vector<double> pred = model_forward(kind, sample, params, config);
        std::vector<double> gt = widen(sample.future_positions);
        check_pair(pred, gt);
        for (int k = 0; k < n; ++k)
            sum_per_step[static_cast<std::size_t>(k)] +=
                step_error(pred, gt, static_cast<std::size_t>(k));
        double e4 = step_error(pred, gt, static_cast<std::size_t>(step4 - 1));
        double e6 = step_error(pred, gt, static_cast<std::size_t>(n - 1));
        sum4 += e4;
        sumsq4 += e4 * e4;
        sum6 += e6;
        sumsq6 += e6 * e6;
    }
    const double count = static_cast<double>(samples.size());
    EvalReport report;
    report.per_step_errors.resize(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        report.per_step_errors[static_cast<std::size_t>(k)] =
            sum_per_step[static_cast<std::size_t>(k)] / count;
        total += sum_per_step[static_cast<std::size_t>(k)];
    }
    report.ade_6s = total / (count * n);
    report.fde_4s = sum4 / count;
    report.fde_6s = sum6 / count;
    report.fde_4s_std = std::sqrt(std::max(0.0, sumsq4 / count - report.fde_4s * report.fde_4s));
    report.fde_6s_std = std::sqrt(std::max(0.0, sumsq6 / count - report.fde_6s * report.fde_6s));
    return report;
}

Json EvalReport::to_json() const {
    return Json{{"ade_6s", ade_6s},
                {"fde_4s", fde_4s},
                {"fde_4s_std", fde_4s_std},
                {"fde_6s", fde_6s},
                {"fde_6s_std", fde_6s_std},
                {"per_step_errors", per_step_errors}};
}

EvalReport EvalReport::from_json(const Json& j) {
    reject_unknown_keys(
        j, {"ade_6s", "fde_4s", "fde_4s_std", "fde_6s", "fde_6s_std", "per_step_errors"},
        "eval report");
    EvalReport report;
    report.ade_6s = j.at("ade_6s").get<double>();
    report.fde_4s = j.at("fde_4s").get<double>();
    report.fde_4s_std = j.at("fde_4s_std").get<double>();
    report.fde_6s = j.at("fde_6s").get<double>();
    report.fde_6s_std = j.at("fde_6s_std").get<double>();
    report.per_step_errors = j.at("per_step_errors").get<std::vector<double>>();
    return report;
}

namespace {

struct ValMetrics {
    double loss = 0.0;
    double ade = 0.0;
};

ValMetrics val_pass(ModelKind kind, const ParamSet& params, const ModelConfig& config,
                    const std::vector<Sample>& samples, double r) {
    double loss_sum = 0.0, err_sum = 0.0;
    const int n = config.n;
    for (const Sample& sample : samples) {
        std::vector<double> pred = model_forward(kind, sample, params, config);
        std::vector<double> gt = widen(sample.future_positions);
        loss_sum += huber_loss(pred, gt, r);
        for (int k = 0; k < n; ++k)
            err_sum += step_error(pred, gt, static_cast<std::size_t>(k));
    }
    double count = static_cast<double>(samples.size());
    return {loss_sum / count, err_sum / (count * n)};
}

}  // namespace

TrainResult train(ModelKind kind, const std::vector<Sample>& train_samples,
                  const std::vector<Sample>& val_samples, const TrainConfig& train_config,
                  const ModelConfig& model_config,
                  const std::function<bool(const EpochLog&)>& on_epoch) {
    train_config.validate();
    model_config.validate();
    if (train_samples.empty() || val_samples.empty())
        throw ConfigError("training needs non-empty train and val splits");

    ParamSet params = build_params(kind, model_config);
    init_uniform_fan_in(params, train_config.seed);
    AdamState adam;
    std::mt19937_64 rng(train_config.seed ^ 0x7261696e5f726e67ULL);

    const std::size_t count = train_samples.size();
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;

    TrainResult result;
    result.best_val_ade = std::numeric_limits<double>::infinity();
    ParamSet best_params = params;
    int since_improve = 0;

    for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
        for (std::size_t i = count; i > 1; --i) {
            std::size_t j = uniform_index(rng, i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < count;
             start += static_cast<std::size_t>(train_config.batch_size)) {
            std::size_t batch =
                std::min(count - start, static_cast<std::size_t>(train_config.batch_size));
            params.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const Sample& sample = train_samples[order[start + b]];
                ForwardTrace trace = forward_trace(kind, sample, params, model_config);
                std::vector<double> gt = widen(sample.future_positions);
                batch_loss += huber_loss(trace.output, gt, train_config.huber_r);
                std::vector<double> g =
                    huber_loss_grad(trace.output, gt, train_config.huber_r);
                for (double& v : g) v /= static_cast<double>(batch);
                backward_trace(trace, g, params, model_config);
            }
            if (!std::isfinite(batch_loss))
                throw DivergenceDetected("non-finite loss in epoch " +
                                         std::to_string(epoch));
            adam_step(params, adam, train_config.learning_rate);
            epoch_loss += batch_loss;
        }
        if (!params.all_finite())
            throw DivergenceDetected("non-finite weights after epoch " +
                                     std::to_string(epoch));

        ValMetrics val =
            val_pass(kind, params, model_config, val_samples, train_config.huber_r);
        EpochLog entry{epoch, epoch_loss / static_cast<double>(count), val.loss, val.ade};
        result.log.push_back(entry);
        bool keep_going = on_epoch ? on_epoch(entry) : true;

        if (val.ade < result.best_val_ade) {
            result.best_val_ade = val.ade;
            result.best_epoch = epoch;
            best_params = params;
            since_improve = 0;
        } else if (++since_improve >= train_config.patience && train_config.patience > 0) {
            break;
        }
        if (!keep_going) break;
    }

    result.params = std::move(best_params);
    return result;
}

void write_training_log_csv(const std::filesystem::path& path,
                            const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write training log " + path.string());
    out << "epoch,train_loss,val_loss,val_ade\n";
    char buffer[160];
    for (const EpochLog& entry : log) {
        std::snprintf(buffer, sizeof(buffer), "%d,%.10g,%.10g,%.10g\n", entry.epoch,
                      entry.train_loss, entry.val_loss, entry.val_ade);
        out << buffer;
    }
    if (!out.good()) throw IoError("failed writing training log " + path.string());
}

}  // namespace sapi
