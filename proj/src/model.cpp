#include "sapi/model.hpp"

#include <algorithm>
#include <cmath>

namespace sapi {

void ModelConfig::validate() const {
    if (m < 2 || m % 2) throw ConfigError("m must be even and >= 2 (max pool halves it)");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (raster_h < 1 || raster_w < 1) throw ConfigError("raster dims must be positive");
    auto odd = [](int k) { return k >= 1 && k % 2 == 1; };
    if (!odd(c3d_kt) || !odd(c3d_kh) || !odd(c3d_kw) || !odd(c2d_k) || !odd(c1d_k))
        throw ConfigError("conv kernels must be odd (same-size padding)");
    if (pool_t != 1)
        throw ConfigError("pool_t must be 1: every history step keeps its own scene slice");
    if (pool_h < 1 || pool_w < 1 || raster_h % pool_h || raster_w % pool_w)
        throw ConfigError("pool window must evenly divide the raster dims");
    for (int v : {c3d_channels, c2d_channels, scene_fc, lstm_hidden, c1d_channels, refine_h,
                  gru_hidden, dec_fc1, dec_fc2, baseline_hidden, baseline_fc})
        if (v < 1) throw ConfigError("all layer widths must be >= 1");
    if (!(position_unit_m > 0.0)) throw ConfigError("position_unit_m must be positive");
}

Json ModelConfig::to_json() const {
    return Json{{"m", m},
                {"n", n},
                {"raster_h", raster_h},
                {"raster_w", raster_w},
                {"c3d_channels", c3d_channels},
                {"c3d_kt", c3d_kt},
                {"c3d_kh", c3d_kh},
                {"c3d_kw", c3d_kw},
                {"pool_t", pool_t},
                {"pool_h", pool_h},
                {"pool_w", pool_w},
                {"c2d_channels", c2d_channels},
                {"c2d_k", c2d_k},
                {"scene_fc", scene_fc},
                {"lstm_hidden", lstm_hidden},
                {"c1d_channels", c1d_channels},
                {"c1d_k", c1d_k},
                {"refine_h", refine_h},
                {"gru_hidden", gru_hidden},
                {"dec_fc1", dec_fc1},
                {"dec_fc2", dec_fc2},
                {"baseline_hidden", baseline_hidden},
                {"baseline_fc", baseline_fc},
                {"position_unit_m", position_unit_m}};
}

ModelConfig ModelConfig::from_json(const Json& j) {
    reject_unknown_keys(j,
                        {"m", "n", "raster_h", "raster_w", "c3d_channels", "c3d_kt", "c3d_kh",
                         "c3d_kw", "pool_t", "pool_h", "pool_w", "c2d_channels", "c2d_k",
                         "scene_fc", "lstm_hidden", "c1d_channels", "c1d_k", "refine_h",
                         "gru_hidden", "dec_fc1", "dec_fc2", "baseline_hidden", "baseline_fc",
                         "position_unit_m"},
                        "model config");
    ModelConfig config;
    config.m = j.value("m", config.m);
    config.n = j.value("n", config.n);
    config.raster_h = j.value("raster_h", config.raster_h);
    config.raster_w = j.value("raster_w", config.raster_w);
    config.c3d_channels = j.value("c3d_channels", config.c3d_channels);
    config.c3d_kt = j.value("c3d_kt", config.c3d_kt);
    config.c3d_kh = j.value("c3d_kh", config.c3d_kh);
    config.c3d_kw = j.value("c3d_kw", config.c3d_kw);
    config.pool_t = j.value("pool_t", config.pool_t);
    config.pool_h = j.value("pool_h", config.pool_h);
    config.pool_w = j.value("pool_w", config.pool_w);
    config.c2d_channels = j.value("c2d_channels", config.c2d_channels);
    config.c2d_k = j.value("c2d_k", config.c2d_k);
    config.scene_fc = j.value("scene_fc", config.scene_fc);
    config.lstm_hidden = j.value("lstm_hidden", config.lstm_hidden);
    config.c1d_channels = j.value("c1d_channels", config.c1d_channels);
    config.c1d_k = j.value("c1d_k", config.c1d_k);
    config.refine_h = j.value("refine_h", config.refine_h);
    config.gru_hidden = j.value("gru_hidden", config.gru_hidden);
    config.dec_fc1 = j.value("dec_fc1", config.dec_fc1);
    config.dec_fc2 = j.value("dec_fc2", config.dec_fc2);
    config.baseline_hidden = j.value("baseline_hidden", config.baseline_hidden);
    config.baseline_fc = j.value("baseline_fc", config.baseline_fc);
    config.position_unit_m = j.value("position_unit_m", config.position_unit_m);
    config.validate();
    return config;
}

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_lra: return "no_lra";
        case Ablation::no_traffic: return "no_traffic";
    }
    return "none";
}

const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::sapi: return "sapi";
        case ModelKind::sapi_no_lra: return "sapi_no_lra";
        case ModelKind::sapi_no_traffic: return "sapi_no_traffic";
        case ModelKind::lstm: return "lstm";
    }
    return "sapi";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "sapi") return ModelKind::sapi;
    if (s == "sapi_no_lra") return ModelKind::sapi_no_lra;
    if (s == "sapi_no_traffic") return ModelKind::sapi_no_traffic;
    if (s == "lstm") return ModelKind::lstm;
    throw ConfigError("unknown model kind '" + s + "'");
}

Ablation ablation_for(ModelKind kind) {
    if (kind == ModelKind::sapi_no_lra) return Ablation::no_lra;
    if (kind == ModelKind::sapi_no_traffic) return Ablation::no_traffic;
    return Ablation::none;
}

// ---------------------------------------------------------------------------
// Layer wiring
// ---------------------------------------------------------------------------

namespace {

Conv3d scene_conv3d(const ModelConfig& c) {
    return {"scene.conv3d", 2,          c.c3d_channels,     c.c3d_kt,
            c.c3d_kh,       c.c3d_kw,   (c.c3d_kt - 1) / 2, (c.c3d_kh - 1) / 2,
            (c.c3d_kw - 1) / 2};
}

Conv3d scene_conv2d(const ModelConfig& c) {
    return {"scene.conv2d", c.c3d_channels, c.c2d_channels, 1, c.c2d_k, c.c2d_k,
            0,              (c.c2d_k - 1) / 2, (c.c2d_k - 1) / 2};
}

Fc scene_fc1(const ModelConfig& c) {
    return {"scene.fc1", c.c2d_channels * c.pooled_h() * c.pooled_w(), c.scene_fc};
}

Fc scene_fc2(const ModelConfig& c) { return {"scene.fc2", c.scene_fc, 3}; }

Lstm seq_lstm(const ModelConfig& c) { return {"seq.lstm", 5, c.lstm_hidden}; }

Conv3d seq_conv1(const ModelConfig& c) {
    return {"seq.conv1", c.lstm_hidden, c.c1d_channels, c.c1d_k, 1, 1, (c.c1d_k - 1) / 2, 0, 0};
}

Conv3d seq_conv2(const ModelConfig& c) {
    return {"seq.conv2", c.c1d_channels, 2, c.c1d_k, 1, 1, (c.c1d_k - 1) / 2, 0, 0};
}

Gru dec_gru(const ModelConfig& c) { return {"dec.gru", 2, c.gru_hidden}; }

Fc dec_fc1(const ModelConfig& c) { return {"dec.fc1", c.gru_hidden, c.dec_fc1}; }
Fc dec_fc2(const ModelConfig& c) { return {"dec.fc2", c.dec_fc1, c.dec_fc2}; }
Fc dec_head(const ModelConfig& c) { return {"dec.head", c.dec_fc2, 2 * c.n}; }

Lstm base_lstm(const ModelConfig& c) { return {"base.lstm", 2, c.baseline_hidden}; }
Fc base_fc1(const ModelConfig& c) { return {"base.fc1", c.baseline_hidden, c.baseline_fc}; }
Fc base_head(const ModelConfig& c) { return {"base.head", c.baseline_fc, 2 * c.n}; }

}  // namespace

ParamSet build_params(ModelKind kind, const ModelConfig& config) {
    config.validate();
    ParamSet params;
    if (kind == ModelKind::lstm) {
        base_lstm(config).create_params(params);
        base_fc1(config).create_params(params);
        base_head(config).create_params(params);
        return params;
    }
    scene_conv3d(config).create_params(params);
    scene_conv2d(config).create_params(params);
    scene_fc1(config).create_params(params);
    scene_fc2(config).create_params(params);
    seq_lstm(config).create_params(params);
    seq_conv1(config).create_params(params);
    seq_conv2(config).create_params(params);
    params.create("refine.W1",
                  {static_cast<std::size_t>(config.m), static_cast<std::size_t>(config.refine_h)},
                  static_cast<std::size_t>(config.m));
    params.create("refine.W2",
                  {static_cast<std::size_t>(config.l3()),
                   static_cast<std::size_t>(config.refine_h)},
                  static_cast<std::size_t>(config.l3()));
    dec_gru(config).create_params(params);
    dec_fc1(config).create_params(params);
    dec_fc2(config).create_params(params);
    dec_head(config).create_params(params);
    return params;
}

// ---------------------------------------------------------------------------
// Forward pieces
// ---------------------------------------------------------------------------

std::vector<double> scene_encode(const std::vector<double>& rasters, const ParamSet& params,
                                 const ModelConfig& config) {
    config.validate();
    const int m = config.m, H = config.raster_h, W = config.raster_w;
    if (rasters.size() != static_cast<std::size_t>(m) * 2 * H * W)
        throw ShapeMismatch("scene input must be m*2*H*W");
    Conv3d conv3 = scene_conv3d(config);
    std::vector<double> y1 = conv3.forward(params, rasters, m, H, W);
    std::vector<double> r1 = relu(y1);
    AvgPool3d pool{1, config.pool_h, config.pool_w};
    std::vector<double> p1 = pool.forward(r1, m, config.c3d_channels, H, W);
    Conv3d conv2 = scene_conv2d(config);
    std::vector<double> y2 = conv2.forward(params, p1, m, config.pooled_h(), config.pooled_w());
    std::vector<double> r2 = relu(y2);
    std::vector<double> y3 = scene_fc1(config).forward(params, r2, m);
    std::vector<double> r3 = relu(y3);
    return scene_fc2(config).forward(params, r3, m);
}

std::vector<double> sequence_encode(const std::vector<double>& t2, const ParamSet& params,
                                    const ModelConfig& config) {
    config.validate();
    const int m = config.m;
    if (t2.size() != static_cast<std::size_t>(m) * 5)
        throw ShapeMismatch("sequence input must be m*5");
    Lstm lstm = seq_lstm(config);
    Lstm::Trace trace = lstm.forward(params, t2, m);
    std::vector<double> y4 = seq_conv1(config).forward(params, trace.h, m, 1, 1);
    std::vector<double> r4 = relu(y4);
    std::vector<double> y5 = MaxPool1d{}.forward(r4, m, config.c1d_channels);
    return seq_conv2(config).forward(params, y5, config.l3(), 1, 1);
}

std::vector<double> refine(const std::vector<double>& s, int rows_s,
                           const std::vector<double>& t3, int rows_t,
                           const std::vector<double>& w1, const std::vector<double>& w2,
                           int h) {
    if (rows_s < 1 || rows_t < 1 || h < 1) throw ShapeMismatch("refine dims must be positive");
    if (s.size() != static_cast<std::size_t>(rows_s) * 2 ||
        t3.size() != static_cast<std::size_t>(rows_t) * 2 ||
        w1.size() != static_cast<std::size_t>(rows_s) * h ||
        w2.size() != static_cast<std::size_t>(rows_t) * h)
        throw ShapeMismatch("refine arguments have inconsistent shapes");
    std::vector<double> t4(static_cast<std::size_t>(h) * 2, 0.0);
    for (int a = 0; a < h; ++a)
        for (int j = 0; j < 2; ++j) {
            double acc = 0.0;
            for (int r = 0; r < rows_s; ++r)
                acc += w1[static_cast<std::size_t>(r) * h + a] *
                       s[static_cast<std::size_t>(r) * 2 + j];
            for (int r = 0; r < rows_t; ++r)
                acc += w2[static_cast<std::size_t>(r) * h + a] *
                       t3[static_cast<std::size_t>(r) * 2 + j];
            t4[static_cast<std::size_t>(a) * 2 + j] = acc;
        }
    return t4;
}

std::vector<double> decode(const std::vector<double>& t4, const ParamSet& params,
                           const ModelConfig& config) {
    config.validate();
    const int h = config.refine_h;
    if (t4.size() != static_cast<std::size_t>(h) * 2)
        throw ShapeMismatch("decoder input must be refine_h*2");
    Gru gru = dec_gru(config);
    Gru::Trace trace = gru.forward(params, t4, h);
    std::vector<double> h_last(trace.h.end() - config.gru_hidden, trace.h.end());
    std::vector<double> y6 = dec_fc1(config).forward(params, h_last, 1);
    std::vector<double> r6 = relu(y6);
    std::vector<double> y7 = dec_fc2(config).forward(params, r6, 1);
    std::vector<double> r7 = relu(y7);
    std::vector<double> head = dec_head(config).forward(params, r7, 1);
    for (double& v : head) v *= config.position_unit_m;
    return head;
}

namespace {

// Scales rasters to [0,1], applies the ablation, lays out [t][channel][H][W].
std::vector<double> sample_scene_input(const Sample& sample, const ModelConfig& config,
                                       Ablation ablation) {
    const int m = config.m, H = config.raster_h, W = config.raster_w;
    if (sample.history_rasters.size() != static_cast<std::size_t>(m))
        throw ShapeMismatch("sample has " + std::to_string(sample.history_rasters.size()) +
                            " rasters, model expects m=" + std::to_string(m));
    const std::size_t pixels = static_cast<std::size_t>(H) * W;
    std::vector<double> x0(static_cast<std::size_t>(m) * 2 * pixels);
    const double lra_scale = ablation == Ablation::no_lra ? 0.0 : 1.0 / 255.0;
    const double traffic_scale = ablation == Ablation::no_traffic ? 0.0 : 1.0 / 255.0;
    for (int t = 0; t < m; ++t) {
        const EnvRaster& raster = sample.history_rasters[static_cast<std::size_t>(t)];
        if (raster.height_px != H || raster.width_px != W)
            throw ShapeMismatch("raster dims do not match the model config");
        if (raster.lra_channel.size() != pixels || raster.traffic_channel.size() != pixels)
            throw ShapeMismatch("raster channels do not match height_px*width_px");
        double* lra = x0.data() + static_cast<std::size_t>(t) * 2 * pixels;
        double* traffic = lra + pixels;
        for (std::size_t p = 0; p < pixels; ++p) {
            lra[p] = lra_scale * raster.lra_channel[p];
            traffic[p] = traffic_scale * raster.traffic_channel[p];
        }
    }
    return x0;
}

std::vector<double> scaled_positions(const std::vector<float>& positions, int m,
                                     double unit) {
    if (positions.size() != static_cast<std::size_t>(m) * 2)
        throw ShapeMismatch("history positions must be m*2");
    std::vector<double> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        out[i] = static_cast<double>(positions[i]) / unit;
    return out;
}

}  // namespace

ForwardTrace forward_trace(ModelKind kind, const Sample& sample, const ParamSet& params,
                           const ModelConfig& config) {
    config.validate();
    ForwardTrace trace;
    trace.kind = kind;
    const int m = config.m;

    if (kind == ModelKind::lstm) {
        trace.base_x = scaled_positions(sample.history_positions, m, config.position_unit_m);
        Lstm lstm = base_lstm(config);
        trace.base_trace = lstm.forward(params, trace.base_x, m);
        trace.base_h_last.assign(trace.base_trace.h.end() - config.baseline_hidden,
                                 trace.base_trace.h.end());
        trace.base_y1 = base_fc1(config).forward(params, trace.base_h_last, 1);
        std::vector<double> r1 = relu(trace.base_y1);
        trace.output = base_head(config).forward(params, r1, 1);
        for (double& v : trace.output) v *= config.position_unit_m;
        return trace;
    }

    const int H = config.raster_h, W = config.raster_w;
    trace.x0 = sample_scene_input(sample, config, ablation_for(kind));

    // Scene encoder.
    trace.y1 = scene_conv3d(config).forward(params, trace.x0, m, H, W);
    std::vector<double> r1 = relu(trace.y1);
    AvgPool3d pool{1, config.pool_h, config.pool_w};
    trace.p1 = pool.forward(r1, m, config.c3d_channels, H, W);
    trace.y2 = scene_conv2d(config).forward(params, trace.p1, m, config.pooled_h(),
                                            config.pooled_w());
    trace.flat2 = relu(trace.y2);
    trace.y3 = scene_fc1(config).forward(params, trace.flat2, m);
    std::vector<double> r3 = relu(trace.y3);
    trace.t1 = scene_fc2(config).forward(params, r3, m);

    // Concat scene features with scaled positions.
    if (sample.history_positions.size() != static_cast<std::size_t>(m) * 2)
        throw ShapeMismatch("history positions must be m*2");
    trace.s_raw.resize(static_cast<std::size_t>(m) * 2);
    for (std::size_t i = 0; i < trace.s_raw.size(); ++i)
        trace.s_raw[i] = static_cast<double>(sample.history_positions[i]);
    trace.t2.resize(static_cast<std::size_t>(m) * 5);
    for (int t = 0; t < m; ++t) {
        for (int f = 0; f < 3; ++f)
            trace.t2[static_cast<std::size_t>(t) * 5 + f] =
                trace.t1[static_cast<std::size_t>(t) * 3 + f];
        for (int f = 0; f < 2; ++f)
            trace.t2[static_cast<std::size_t>(t) * 5 + 3 + f] =
                trace.s_raw[static_cast<std::size_t>(t) * 2 + f] / config.position_unit_m;
    }

    // Sequence encoder.
    Lstm lstm = seq_lstm(config);
    trace.lstm_trace = lstm.forward(params, trace.t2, m);
    trace.y4 = seq_conv1(config).forward(params, trace.lstm_trace.h, m, 1, 1);
    std::vector<double> r4 = relu(trace.y4);
    trace.y5 = MaxPool1d{}.forward(r4, m, config.c1d_channels);
    trace.t3 = seq_conv2(config).forward(params, trace.y5, config.l3(), 1, 1);

    // Refine + decode.
    trace.t4 = refine(trace.s_raw, m, trace.t3, config.l3(), params.at("refine.W1").value,
                      params.at("refine.W2").value, config.refine_h);
    Gru gru = dec_gru(config);
    trace.gru_trace = gru.forward(params, trace.t4, config.refine_h);
    trace.h_last.assign(trace.gru_trace.h.end() - config.gru_hidden, trace.gru_trace.h.end());
    trace.y6 = dec_fc1(config).forward(params, trace.h_last, 1);
    std::vector<double> r6 = relu(trace.y6);
    trace.y7 = dec_fc2(config).forward(params, r6, 1);
    std::vector<double> r7 = relu(trace.y7);
    trace.output = dec_head(config).forward(params, r7, 1);
    for (double& v : trace.output) v *= config.position_unit_m;
    return trace;
}

void backward_trace(const ForwardTrace& trace, const std::vector<double>& g_output,
                    ParamSet& params, const ModelConfig& config) {
    if (g_output.size() != static_cast<std::size_t>(config.n) * 2)
        throw ShapeMismatch("output gradient must be n*2");
    std::vector<double> g_head(g_output);
    for (double& v : g_head) v *= config.position_unit_m;

    if (trace.kind == ModelKind::lstm) {
        std::vector<double> r1 = relu(trace.base_y1);
        std::vector<double> g_r1 = base_head(config).backward(params, r1, g_head, 1);
        std::vector<double> g_y1 = relu_backward(trace.base_y1, g_r1);
        std::vector<double> g_hlast =
            base_fc1(config).backward(params, trace.base_h_last, g_y1, 1);
        std::vector<double> gh(static_cast<std::size_t>(config.m) * config.baseline_hidden,
                               0.0);
        std::copy(g_hlast.begin(), g_hlast.end(), gh.end() - config.baseline_hidden);
        base_lstm(config).backward(params, trace.base_x, trace.base_trace, gh, config.m);
        return;
    }

    const int m = config.m, h = config.refine_h, l3 = config.l3();

    // Decoder.
    std::vector<double> r7 = relu(trace.y7);
    std::vector<double> g_r7 = dec_head(config).backward(params, r7, g_head, 1);
    std::vector<double> g_y7 = relu_backward(trace.y7, g_r7);
    std::vector<double> r6 = relu(trace.y6);
    std::vector<double> g_r6 = dec_fc2(config).backward(params, r6, g_y7, 1);
    std::vector<double> g_y6 = relu_backward(trace.y6, g_r6);
    std::vector<double> g_hlast = dec_fc1(config).backward(params, trace.h_last, g_y6, 1);
    std::vector<double> gh(static_cast<std::size_t>(h) * config.gru_hidden, 0.0);
    std::copy(g_hlast.begin(), g_hlast.end(), gh.end() - config.gru_hidden);
    std::vector<double> g_t4 =
        dec_gru(config).backward(params, trace.t4, trace.gru_trace, gh, h);

    // Refiner: T4 = W1^T S + W2^T T3.
    {
        std::vector<double>& gw1 = params.at("refine.W1").grad;
        std::vector<double>& gw2 = params.at("refine.W2").grad;
        const std::vector<double>& w2 = params.at("refine.W2").value;
        for (int r = 0; r < m; ++r)
            for (int a = 0; a < h; ++a)
                gw1[static_cast<std::size_t>(r) * h + a] +=
                    trace.s_raw[static_cast<std::size_t>(r) * 2] *
                        g_t4[static_cast<std::size_t>(a) * 2] +
                    trace.s_raw[static_cast<std::size_t>(r) * 2 + 1] *
                        g_t4[static_cast<std::size_t>(a) * 2 + 1];
        for (int r = 0; r < l3; ++r)
            for (int a = 0; a < h; ++a)
                gw2[static_cast<std::size_t>(r) * h + a] +=
                    trace.t3[static_cast<std::size_t>(r) * 2] *
                        g_t4[static_cast<std::size_t>(a) * 2] +
                    trace.t3[static_cast<std::size_t>(r) * 2 + 1] *
                        g_t4[static_cast<std::size_t>(a) * 2 + 1];
        std::vector<double> g_t3(static_cast<std::size_t>(l3) * 2, 0.0);
        for (int r = 0; r < l3; ++r)
            for (int j = 0; j < 2; ++j) {
                double acc = 0.0;
                for (int a = 0; a < h; ++a)
                    acc += w2[static_cast<std::size_t>(r) * h + a] *
                           g_t4[static_cast<std::size_t>(a) * 2 + j];
                g_t3[static_cast<std::size_t>(r) * 2 + j] = acc;
            }

        // Sequence encoder.
        std::vector<double> g_y5 =
            seq_conv2(config).backward(params, trace.y5, g_t3, l3, 1, 1);
        std::vector<double> r4 = relu(trace.y4);
        std::vector<double> g_r4 =
            MaxPool1d{}.backward(r4, g_y5, m, config.c1d_channels);
        std::vector<double> g_y4 = relu_backward(trace.y4, g_r4);
        std::vector<double> g_lstm_h =
            seq_conv1(config).backward(params, trace.lstm_trace.h, g_y4, m, 1, 1);
        std::vector<double> g_t2 =
            seq_lstm(config).backward(params, trace.t2, trace.lstm_trace, g_lstm_h, m);

        // Scene encoder (positions' share of g_t2 stops at the input).
        std::vector<double> g_t1(static_cast<std::size_t>(m) * 3);
        for (int t = 0; t < m; ++t)
            for (int f = 0; f < 3; ++f)
                g_t1[static_cast<std::size_t>(t) * 3 + f] =
                    g_t2[static_cast<std::size_t>(t) * 5 + f];
        std::vector<double> r3 = relu(trace.y3);
        std::vector<double> g_r3 = scene_fc2(config).backward(params, r3, g_t1, m);
        std::vector<double> g_y3 = relu_backward(trace.y3, g_r3);
        std::vector<double> g_flat2 =
            scene_fc1(config).backward(params, trace.flat2, g_y3, m);
        std::vector<double> g_y2 = relu_backward(trace.y2, g_flat2);
        std::vector<double> g_p1 = scene_conv2d(config).backward(
            params, trace.p1, g_y2, m, config.pooled_h(), config.pooled_w());
        AvgPool3d pool{1, config.pool_h, config.pool_w};
        std::vector<double> g_r1 = pool.backward(g_p1, m, config.c3d_channels,
                                                 config.raster_h, config.raster_w);
        std::vector<double> g_y1 = relu_backward(trace.y1, g_r1);
        scene_conv3d(config).backward(params, trace.x0, g_y1, m, config.raster_h,
                                      config.raster_w);
    }
}

std::vector<double> forward(const Sample& sample, const ParamSet& params,
                            const ModelConfig& config, Ablation ablation) {
    ModelKind kind = ablation == Ablation::no_lra
                         ? ModelKind::sapi_no_lra
                         : (ablation == Ablation::no_traffic ? ModelKind::sapi_no_traffic
                                                             : ModelKind::sapi);
    return forward_trace(kind, sample, params, config).output;
}

std::vector<double> lstm_baseline_forward(const std::vector<float>& history_positions,
                                          const ParamSet& params, const ModelConfig& config) {
    Sample sample;
    sample.history_positions = history_positions;
    return forward_trace(ModelKind::lstm, sample, params, config).output;
}

std::vector<double> model_forward(ModelKind kind, const Sample& sample,
                                  const ParamSet& params, const ModelConfig& config) {
    return forward_trace(kind, sample, params, config).output;
}

void save_checkpoint(const std::filesystem::path& dir, const ParamSet& params,
                     ModelKind kind, const ModelConfig& config, std::uint64_t seed) {
    save_params(dir, params, seed,
                Json{{"model_kind", to_string(kind)}, {"config", config.to_json()}});
}

LoadedModel load_checkpoint(const std::filesystem::path& dir) {
    LoadedParams loaded = load_params(dir);
    reject_unknown_keys(loaded.extra, {"model_kind", "config"}, "checkpoint extra");
    LoadedModel model;
    model.params = std::move(loaded.params);
    model.seed = loaded.seed;
    model.kind = model_kind_from_string(loaded.extra.at("model_kind").get<std::string>());
    model.config = ModelConfig::from_json(loaded.extra.at("config"));
    return model;
}

}  // namespace sapi
