#pragma once

#include <string>
#include <vector>

#include "sapi/dataset.hpp"
#include "sapi/nn.hpp"

namespace sapi {

// Architecture knobs. The shape chain is
//   (m,2,H,W) -> scene encoder -> (m,3)
//   concat positions -> (m,5) -> sequence encoder -> (L3,2), L3 = m/2
//   refiner -> (h,2) -> decoder -> (n,2)
struct ModelConfig {
    int m = 12;
    int n = 15;
    int raster_h = 200, raster_w = 200;

    // Scene encoder: 3-D conv, 3-D average pool, per-step 2-D conv, two
    // per-step fully connected layers ending in 3 features per history step.
    int c3d_channels = 8;
    int c3d_kt = 3, c3d_kh = 5, c3d_kw = 5;
    int pool_t = 1, pool_h = 4, pool_w = 4;
    int c2d_channels = 16;
    int c2d_k = 3;
    int scene_fc = 128;

    // Sequence encoder: LSTM, 1-D conv, max pool (window 2), 1-D conv to 2
    // channels.
    int lstm_hidden = 64;
    int c1d_channels = 32;
    int c1d_k = 3;

    int refine_h = 32;

    // Decoder: GRU over the refined (h,2) sequence, two fully connected
    // layers, dense head to n*2.
    int gru_hidden = 128;
    int dec_fc1 = 128, dec_fc2 = 64;

    // History-only recurrent baseline.
    int baseline_hidden = 256;
    int baseline_fc = 128;

    // Positions entering recurrent layers are divided by this; the output
    // head is multiplied by it. Keeps activations O(1) at street scale.
    double position_unit_m = 20.0;

    int l3() const { return m / 2; }
    int pooled_h() const { return raster_h / pool_h; }
    int pooled_w() const { return raster_w / pool_w; }

    void validate() const;
    Json to_json() const;
    static ModelConfig from_json(const Json& j);
};

enum class Ablation { none, no_lra, no_traffic };
enum class ModelKind { sapi, sapi_no_lra, sapi_no_traffic, lstm };

const char* to_string(Ablation a);
const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);
Ablation ablation_for(ModelKind kind);

// Registers every parameter block for the kind (shared architecture for all
// sapi variants; the history-only baseline has its own set).
ParamSet build_params(ModelKind kind, const ModelConfig& config);

// ---------------------------------------------------------------------------
// Forward paths
// ---------------------------------------------------------------------------

// rasters: m*2*H*W values already scaled to [0,1], slice-major (channel 0 is
// the reachable-area mask). Returns the per-step scene features, m*3.
std::vector<double> scene_encode(const std::vector<double>& rasters, const ParamSet& params,
                                 const ModelConfig& config);

// t2: m*5 (scene features ++ scaled positions per step). Returns l3()*2.
std::vector<double> sequence_encode(const std::vector<double>& t2, const ParamSet& params,
                                    const ModelConfig& config);

// T4 = W1^T S + W2^T T3 with S (rows_s x 2), T3 (rows_t x 2), W1 (rows_s x h),
// W2 (rows_t x h); result h x 2. Pure linear algebra, any consistent dims.
std::vector<double> refine(const std::vector<double>& s, int rows_s,
                           const std::vector<double>& t3, int rows_t,
                           const std::vector<double>& w1, const std::vector<double>& w2,
                           int h);

// t4: refine_h*2. Returns the predicted offsets, n*2 in meters.
std::vector<double> decode(const std::vector<double>& t4, const ParamSet& params,
                           const ModelConfig& config);

// Full pipeline on one sample; ablations zero one raster channel before the
// scene encoder. Output n*2 ego-frame meters.
std::vector<double> forward(const Sample& sample, const ParamSet& params,
                            const ModelConfig& config, Ablation ablation);

std::vector<double> lstm_baseline_forward(const std::vector<float>& history_positions,
                                          const ParamSet& params, const ModelConfig& config);

// Dispatch on kind (the baseline ignores rasters entirely).
std::vector<double> model_forward(ModelKind kind, const Sample& sample,
                                  const ParamSet& params, const ModelConfig& config);

// ---------------------------------------------------------------------------
// Training path: forward that keeps every intermediate, plus the matching
// backward accumulating parameter gradients from d(loss)/d(output).
// ---------------------------------------------------------------------------

struct ForwardTrace {
    ModelKind kind = ModelKind::sapi;
    std::vector<double> output;  // n*2 meters

    // sapi intermediates
    std::vector<double> x0, y1, p1, y2, flat2, y3, t1;
    std::vector<double> t2, s_raw;
    Lstm::Trace lstm_trace;
    std::vector<double> y4, y5, t3, t4;
    Gru::Trace gru_trace;
    std::vector<double> h_last, y6, y7;

    // baseline intermediates
    std::vector<double> base_x;
    Lstm::Trace base_trace;
    std::vector<double> base_h_last, base_y1;
};

ForwardTrace forward_trace(ModelKind kind, const Sample& sample, const ParamSet& params,
                           const ModelConfig& config);

// g_output: d(loss)/d(output), n*2 meters. Adds into ParamBlock::grad.
void backward_trace(const ForwardTrace& trace, const std::vector<double>& g_output,
                    ParamSet& params, const ModelConfig& config);

// Checkpoint helpers: parameters + kind + config echo.
void save_checkpoint(const std::filesystem::path& dir, const ParamSet& params,
                     ModelKind kind, const ModelConfig& config, std::uint64_t seed);
struct LoadedModel {
    ParamSet params;
    ModelKind kind = ModelKind::sapi;
    ModelConfig config;
    std::uint64_t seed = 0;
};
LoadedModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace sapi
