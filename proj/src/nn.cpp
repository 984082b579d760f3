#include "sapi/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sapi/common.hpp"

namespace sapi {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_size(const std::vector<double>& v, std::size_t expected, const char* what) {
    if (v.size() != expected)
        throw ShapeMismatch(std::string(what) + ": got " + std::to_string(v.size()) +
                            " values, expected " + std::to_string(expected));
}

}  // namespace

ParamBlock& ParamSet::create(const std::string& name, std::vector<std::size_t> shape,
                             std::size_t fan_in_override) {
    if (index_.count(name)) throw ConfigError("duplicate parameter block '" + name + "'");
    if (shape.empty()) throw ConfigError("parameter block '" + name + "' needs a shape");
    std::size_t count = 1;
    for (std::size_t dim : shape) {
        if (dim == 0) throw ConfigError("parameter block '" + name + "' has a zero dim");
        count *= dim;
    }
    ParamBlock block;
    block.name = name;
    block.shape = std::move(shape);
    if (fan_in_override != SIZE_MAX) {
        block.fan_in = fan_in_override;
    } else if (block.shape.size() <= 1) {
        block.fan_in = 0;  // bias
    } else {
        block.fan_in = count / block.shape[0];
    }
    block.value.assign(count, 0.0);
    block.grad.assign(count, 0.0);
    index_[name] = blocks_.size();
    blocks_.push_back(std::move(block));
    return blocks_.back();
}

ParamBlock& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter block '" + name + "'");
    return blocks_[it->second];
}

const ParamBlock& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter block '" + name + "'");
    return blocks_[it->second];
}

void ParamSet::zero_grads() {
    for (ParamBlock& block : blocks_) std::fill(block.grad.begin(), block.grad.end(), 0.0);
}

std::size_t ParamSet::total_size() const {
    std::size_t total = 0;
    for (const ParamBlock& block : blocks_) total += block.size();
    return total;
}

bool ParamSet::all_finite() const {
    for (const ParamBlock& block : blocks_) {
        for (double v : block.value)
            if (!std::isfinite(v)) return false;
        for (double g : block.grad)
            if (!std::isfinite(g)) return false;
    }
    return true;
}

void init_uniform_fan_in(ParamSet& params, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (ParamBlock& block : params.blocks()) {
        if (block.fan_in == 0) {
            std::fill(block.value.begin(), block.value.end(), 0.0);
            continue;
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(block.fan_in));
        for (double& v : block.value) v = uniform_in(rng, -bound, bound);
    }
}

void adam_step(ParamSet& params, AdamState& state, double learning_rate) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (ParamBlock& block : params.blocks()) {
        auto& [m, v] = state.moments[block.name];
        if (m.size() != block.size()) {
            m.assign(block.size(), 0.0);
            v.assign(block.size(), 0.0);
        }
        for (std::size_t i = 0; i < block.size(); ++i) {
            const double g = block.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            block.value[i] -= learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
        }
    }
}

void save_params(const std::filesystem::path& dir, const ParamSet& params,
                 std::uint64_t seed, const Json& extra) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory '" + dir.string() + "'");
    Json entries = Json::array();
    for (const ParamBlock& block : params.blocks()) {
        const std::string blob = block.name + ".f32";
        std::vector<float> narrowed(block.value.begin(), block.value.end());
        write_f32_blob(dir / blob, narrowed);
        entries.push_back(Json{{"name", block.name},
                               {"shape", block.shape},
                               {"fan_in", block.fan_in},
                               {"blob", blob}});
    }
    Json manifest{{"schema_version", 1},
                  {"seed", seed},
                  {"extra", extra},
                  {"params", std::move(entries)}};
    write_json_file(dir / "manifest.json", manifest);
}

LoadedParams load_params(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "manifest.json"))
        throw MissingCheckpoint("no checkpoint manifest at '" + dir.string() + "'");
    Json manifest = read_json_file(dir / "manifest.json");
    reject_unknown_keys(manifest, {"schema_version", "seed", "extra", "params"},
                        "checkpoint manifest");
    require_schema_version(manifest, 1, "checkpoint manifest");
    LoadedParams loaded;
    loaded.seed = manifest.at("seed").get<std::uint64_t>();
    loaded.extra = manifest.at("extra");
    for (const Json& entry : manifest.at("params")) {
        reject_unknown_keys(entry, {"name", "shape", "fan_in", "blob"}, "checkpoint entry");
        ParamBlock& block = loaded.params.create(
            entry.at("name").get<std::string>(),
            entry.at("shape").get<std::vector<std::size_t>>(),
            entry.at("fan_in").get<std::size_t>());
        std::vector<float> data = read_f32_blob(dir / entry.at("blob").get<std::string>());
        if (data.size() != block.size())
            throw ShapeMismatch("checkpoint blob for '" + block.name +
                                "' does not match its shape");
        std::copy(data.begin(), data.end(), block.value.begin());
    }
    return loaded;
}

// ---------------------------------------------------------------------------
// Conv3d
// ---------------------------------------------------------------------------

void Conv3d::create_params(ParamSet& params) const {
    params.create(name + ".W",
                  {static_cast<std::size_t>(out_ch), static_cast<std::size_t>(in_ch),
                   static_cast<std::size_t>(kt), static_cast<std::size_t>(kh),
                   static_cast<std::size_t>(kw)});
    params.create(name + ".b", {static_cast<std::size_t>(out_ch)});
}

std::vector<double> Conv3d::forward(const ParamSet& params, const std::vector<double>& x,
                                    int T, int H, int W) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    const std::vector<double>& b = params.at(name + ".b").value;
    check_size(x, static_cast<std::size_t>(T) * in_ch * H * W, "conv3d input");
    const int To = out_t(T), Ho = out_h(H), Wo = out_w(W);
    if (To <= 0 || Ho <= 0 || Wo <= 0)
        throw ShapeMismatch("conv3d kernel larger than padded input");
    std::vector<double> y(static_cast<std::size_t>(To) * out_ch * Ho * Wo);
    std::size_t yi = 0;
    for (int to = 0; to < To; ++to) {
        const int dt0 = std::max(0, pt - to), dt1 = std::min(kt, T + pt - to);
        for (int co = 0; co < out_ch; ++co) {
            for (int yo = 0; yo < Ho; ++yo) {
                const int dy0 = std::max(0, ph - yo), dy1 = std::min(kh, H + ph - yo);
                for (int xo = 0; xo < Wo; ++xo) {
                    const int dx0 = std::max(0, pw - xo), dx1 = std::min(kw, W + pw - xo);
                    double acc = b[co];
                    for (int ci = 0; ci < in_ch; ++ci) {
                        for (int dt = dt0; dt < dt1; ++dt) {
                            const int ti = to - pt + dt;
                            for (int dy = dy0; dy < dy1; ++dy) {
                                const int row = yo - ph + dy;
                                const double* xp = x.data() +
                                    ((static_cast<std::size_t>(ti) * in_ch + ci) * H + row) * W +
                                    (xo - pw + dx0);
                                const double* wp = w.data() +
                                    (((static_cast<std::size_t>(co) * in_ch + ci) * kt + dt) *
                                         kh + dy) * kw + dx0;
                                for (int dx = dx0; dx < dx1; ++dx)
                                    acc += xp[dx - dx0] * wp[dx - dx0];
                            }
                        }
                    }
                    y[yi++] = acc;
                }
            }
        }
    }
    return y;
}

std::vector<double> Conv3d::backward(ParamSet& params, const std::vector<double>& x,
                                     const std::vector<double>& gy, int T, int H,
                                     int W) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    std::vector<double>& gw = params.at(name + ".W").grad;
    std::vector<double>& gb = params.at(name + ".b").grad;
    const int To = out_t(T), Ho = out_h(H), Wo = out_w(W);
    check_size(x, static_cast<std::size_t>(T) * in_ch * H * W, "conv3d input");
    check_size(gy, static_cast<std::size_t>(To) * out_ch * Ho * Wo, "conv3d upstream grad");
    std::vector<double> gx(x.size(), 0.0);
    std::size_t yi = 0;
    for (int to = 0; to < To; ++to) {
        const int dt0 = std::max(0, pt - to), dt1 = std::min(kt, T + pt - to);
        for (int co = 0; co < out_ch; ++co) {
            for (int yo = 0; yo < Ho; ++yo) {
                const int dy0 = std::max(0, ph - yo), dy1 = std::min(kh, H + ph - yo);
                for (int xo = 0; xo < Wo; ++xo) {
                    const int dx0 = std::max(0, pw - xo), dx1 = std::min(kw, W + pw - xo);
                    const double g = gy[yi++];
                    if (g == 0.0) continue;
                    gb[co] += g;
                    for (int ci = 0; ci < in_ch; ++ci) {
                        for (int dt = dt0; dt < dt1; ++dt) {
                            const int ti = to - pt + dt;
                            for (int dy = dy0; dy < dy1; ++dy) {
                                const int row = yo - ph + dy;
                                const std::size_t xoff =
                                    ((static_cast<std::size_t>(ti) * in_ch + ci) * H + row) * W +
                                    (xo - pw + dx0);
                                const std::size_t woff =
                                    (((static_cast<std::size_t>(co) * in_ch + ci) * kt + dt) *
                                         kh + dy) * kw + dx0;
                                for (int dx = dx0; dx < dx1; ++dx) {
                                    gx[xoff + dx - dx0] += w[woff + dx - dx0] * g;
                                    gw[woff + dx - dx0] += x[xoff + dx - dx0] * g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

std::vector<double> AvgPool3d::forward(const std::vector<double>& x, int T, int C, int H,
                                       int W) const {
    if (wt <= 0 || wh <= 0 || ww <= 0 || T % wt || H % wh || W % ww)
        throw ShapeMismatch("average-pool window must evenly divide [T, H, W]");
    check_size(x, static_cast<std::size_t>(T) * C * H * W, "avg-pool input");
    const int To = T / wt, Ho = H / wh, Wo = W / ww;
    const double inv = 1.0 / (static_cast<double>(wt) * wh * ww);
    std::vector<double> y(static_cast<std::size_t>(To) * C * Ho * Wo);
    std::size_t yi = 0;
    for (int to = 0; to < To; ++to)
        for (int c = 0; c < C; ++c)
            for (int yo = 0; yo < Ho; ++yo)
                for (int xo = 0; xo < Wo; ++xo) {
                    double acc = 0.0;
                    for (int dt = 0; dt < wt; ++dt)
                        for (int dy = 0; dy < wh; ++dy)
                            for (int dx = 0; dx < ww; ++dx)
                                acc += x[((static_cast<std::size_t>(to * wt + dt) * C + c) * H +
                                          yo * wh + dy) * W + xo * ww + dx];
                    y[yi++] = acc * inv;
                }
    return y;
}

std::vector<double> AvgPool3d::backward(const std::vector<double>& gy, int T, int C, int H,
                                        int W) const {
    const int To = T / wt, Ho = H / wh, Wo = W / ww;
    check_size(gy, static_cast<std::size_t>(To) * C * Ho * Wo, "avg-pool upstream grad");
    const double inv = 1.0 / (static_cast<double>(wt) * wh * ww);
    std::vector<double> gx(static_cast<std::size_t>(T) * C * H * W, 0.0);
    std::size_t yi = 0;
    for (int to = 0; to < To; ++to)
        for (int c = 0; c < C; ++c)
            for (int yo = 0; yo < Ho; ++yo)
                for (int xo = 0; xo < Wo; ++xo) {
                    const double g = gy[yi++] * inv;
                    for (int dt = 0; dt < wt; ++dt)
                        for (int dy = 0; dy < wh; ++dy)
                            for (int dx = 0; dx < ww; ++dx)
                                gx[((static_cast<std::size_t>(to * wt + dt) * C + c) * H +
                                    yo * wh + dy) * W + xo * ww + dx] += g;
                }
    return gx;
}

std::vector<double> MaxPool1d::forward(const std::vector<double>& x, int T, int C) const {
    if (T % 2) throw ShapeMismatch("max-pool needs an even number of time steps");
    check_size(x, static_cast<std::size_t>(T) * C, "max-pool input");
    std::vector<double> y(static_cast<std::size_t>(T / 2) * C);
    for (int t = 0; t < T / 2; ++t)
        for (int c = 0; c < C; ++c)
            y[static_cast<std::size_t>(t) * C + c] =
                std::max(x[static_cast<std::size_t>(2 * t) * C + c],
                         x[static_cast<std::size_t>(2 * t + 1) * C + c]);
    return y;
}

std::vector<double> MaxPool1d::backward(const std::vector<double>& x,
                                        const std::vector<double>& gy, int T, int C) const {
    check_size(gy, static_cast<std::size_t>(T / 2) * C, "max-pool upstream grad");
    std::vector<double> gx(static_cast<std::size_t>(T) * C, 0.0);
    for (int t = 0; t < T / 2; ++t)
        for (int c = 0; c < C; ++c) {
            const double a = x[static_cast<std::size_t>(2 * t) * C + c];
            const double b = x[static_cast<std::size_t>(2 * t + 1) * C + c];
            const int winner = a >= b ? 2 * t : 2 * t + 1;  // ties go to the earlier step
            gx[static_cast<std::size_t>(winner) * C + c] +=
                gy[static_cast<std::size_t>(t) * C + c];
        }
    return gx;
}

// ---------------------------------------------------------------------------
// Fully connected + activation
// ---------------------------------------------------------------------------

void Fc::create_params(ParamSet& params) const {
    params.create(name + ".W",
                  {static_cast<std::size_t>(out), static_cast<std::size_t>(in)});
    params.create(name + ".b", {static_cast<std::size_t>(out)});
}

std::vector<double> Fc::forward(const ParamSet& params, const std::vector<double>& x,
                                int rows) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    const std::vector<double>& b = params.at(name + ".b").value;
    check_size(x, static_cast<std::size_t>(rows) * in, "fc input");
    std::vector<double> y(static_cast<std::size_t>(rows) * out);
    for (int r = 0; r < rows; ++r) {
        const double* xp = x.data() + static_cast<std::size_t>(r) * in;
        double* yp = y.data() + static_cast<std::size_t>(r) * out;
        for (int o = 0; o < out; ++o) {
            const double* wp = w.data() + static_cast<std::size_t>(o) * in;
            double acc = b[o];
            for (int i = 0; i < in; ++i) acc += xp[i] * wp[i];
            yp[o] = acc;
        }
    }
    return y;
}

std::vector<double> Fc::backward(ParamSet& params, const std::vector<double>& x,
                                 const std::vector<double>& gy, int rows) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    std::vector<double>& gw = params.at(name + ".W").grad;
    std::vector<double>& gb = params.at(name + ".b").grad;
    check_size(x, static_cast<std::size_t>(rows) * in, "fc input");
    check_size(gy, static_cast<std::size_t>(rows) * out, "fc upstream grad");
    std::vector<double> gx(x.size(), 0.0);
    for (int r = 0; r < rows; ++r) {
        const double* xp = x.data() + static_cast<std::size_t>(r) * in;
        const double* gp = gy.data() + static_cast<std::size_t>(r) * out;
        double* gxp = gx.data() + static_cast<std::size_t>(r) * in;
        for (int o = 0; o < out; ++o) {
            const double g = gp[o];
            if (g == 0.0) continue;
            gb[o] += g;
            const double* wp = w.data() + static_cast<std::size_t>(o) * in;
            double* gwp = gw.data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                gwp[i] += g * xp[i];
                gxp[i] += g * wp[i];
            }
        }
    }
    return gx;
}

std::vector<double> relu(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

std::vector<double> relu_backward(const std::vector<double>& x,
                                  const std::vector<double>& gy) {
    check_size(gy, x.size(), "relu upstream grad");
    std::vector<double> gx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
    return gx;
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

void Lstm::create_params(ParamSet& params) const {
    params.create(name + ".W",
                  {static_cast<std::size_t>(4 * hidden), static_cast<std::size_t>(in)});
    params.create(name + ".U",
                  {static_cast<std::size_t>(4 * hidden), static_cast<std::size_t>(hidden)});
    params.create(name + ".b", {static_cast<std::size_t>(4 * hidden)});
}

Lstm::Trace Lstm::forward(const ParamSet& params, const std::vector<double>& x, int T) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    const std::vector<double>& u = params.at(name + ".U").value;
    const std::vector<double>& b = params.at(name + ".b").value;
    check_size(x, static_cast<std::size_t>(T) * in, "lstm input");
    const int H = hidden;
    Trace trace;
    trace.h.assign(static_cast<std::size_t>(T) * H, 0.0);
    trace.c.assign(static_cast<std::size_t>(T) * H, 0.0);
    trace.gates.assign(static_cast<std::size_t>(T) * 4 * H, 0.0);
    std::vector<double> pre(static_cast<std::size_t>(4) * H);
    for (int t = 0; t < T; ++t) {
        const double* xt = x.data() + static_cast<std::size_t>(t) * in;
        const double* h_prev = t > 0 ? trace.h.data() + static_cast<std::size_t>(t - 1) * H
                                     : nullptr;
        for (int j = 0; j < 4 * H; ++j) {
            const double* wp = w.data() + static_cast<std::size_t>(j) * in;
            double acc = b[j];
            for (int i = 0; i < in; ++i) acc += wp[i] * xt[i];
            if (h_prev) {
                const double* up = u.data() + static_cast<std::size_t>(j) * H;
                for (int k = 0; k < H; ++k) acc += up[k] * h_prev[k];
            }
            pre[j] = acc;
        }
        double* gates = trace.gates.data() + static_cast<std::size_t>(t) * 4 * H;
        double* ct = trace.c.data() + static_cast<std::size_t>(t) * H;
        double* ht = trace.h.data() + static_cast<std::size_t>(t) * H;
        const double* c_prev = t > 0 ? trace.c.data() + static_cast<std::size_t>(t - 1) * H
                                     : nullptr;
        for (int k = 0; k < H; ++k) {
            const double gi = sigmoid(pre[k]);
            const double gf = sigmoid(pre[H + k]);
            const double gg = std::tanh(pre[2 * H + k]);
            const double go = sigmoid(pre[3 * H + k]);
            gates[k] = gi;
            gates[H + k] = gf;
            gates[2 * H + k] = gg;
            gates[3 * H + k] = go;
            ct[k] = gf * (c_prev ? c_prev[k] : 0.0) + gi * gg;
            ht[k] = go * std::tanh(ct[k]);
        }
    }
    return trace;
}

std::vector<double> Lstm::backward(ParamSet& params, const std::vector<double>& x,
                                   const Trace& trace, const std::vector<double>& gh,
                                   int T) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    const std::vector<double>& u = params.at(name + ".U").value;
    std::vector<double>& gw = params.at(name + ".W").grad;
    std::vector<double>& gu = params.at(name + ".U").grad;
    std::vector<double>& gb = params.at(name + ".b").grad;
    const int H = hidden;
    check_size(gh, static_cast<std::size_t>(T) * H, "lstm upstream grad");
    std::vector<double> gx(static_cast<std::size_t>(T) * in, 0.0);
    std::vector<double> dh(H, 0.0), dc(H, 0.0), dz(static_cast<std::size_t>(4) * H);
    for (int t = T - 1; t >= 0; --t) {
        const double* gates = trace.gates.data() + static_cast<std::size_t>(t) * 4 * H;
        const double* ct = trace.c.data() + static_cast<std::size_t>(t) * H;
        const double* c_prev = t > 0 ? trace.c.data() + static_cast<std::size_t>(t - 1) * H
                                     : nullptr;
        const double* h_prev = t > 0 ? trace.h.data() + static_cast<std::size_t>(t - 1) * H
                                     : nullptr;
        const double* xt = x.data() + static_cast<std::size_t>(t) * in;
        for (int k = 0; k < H; ++k) {
            const double gi = gates[k], gf = gates[H + k], gg = gates[2 * H + k],
                         go = gates[3 * H + k];
            const double tc = std::tanh(ct[k]);
            const double dht = gh[static_cast<std::size_t>(t) * H + k] + dh[k];
            const double dct = dht * go * (1.0 - tc * tc) + dc[k];
            dz[k] = dct * gg * gi * (1.0 - gi);                                   // input gate
            dz[H + k] = dct * (c_prev ? c_prev[k] : 0.0) * gf * (1.0 - gf);       // forget gate
            dz[2 * H + k] = dct * gi * (1.0 - gg * gg);                           // candidate
            dz[3 * H + k] = dht * tc * go * (1.0 - go);                           // output gate
            dc[k] = dct * gf;
        }
        std::fill(dh.begin(), dh.end(), 0.0);
        for (int j = 0; j < 4 * H; ++j) {
            const double g = dz[j];
            gb[j] += g;
            double* gwp = gw.data() + static_cast<std::size_t>(j) * in;
            const double* wp = w.data() + static_cast<std::size_t>(j) * in;
            double* gxt = gx.data() + static_cast<std::size_t>(t) * in;
            for (int i = 0; i < in; ++i) {
                gwp[i] += g * xt[i];
                gxt[i] += g * wp[i];
            }
            if (h_prev) {
                double* gup = gu.data() + static_cast<std::size_t>(j) * H;
                const double* up = u.data() + static_cast<std::size_t>(j) * H;
                for (int k = 0; k < H; ++k) {
                    gup[k] += g * h_prev[k];
                    dh[k] += g * up[k];
                }
            }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

void Gru::create_params(ParamSet& params) const {
    params.create(name + ".W",
                  {static_cast<std::size_t>(3 * hidden), static_cast<std::size_t>(in)});
    params.create(name + ".U",
                  {static_cast<std::size_t>(3 * hidden), static_cast<std::size_t>(hidden)});
    params.create(name + ".b", {static_cast<std::size_t>(3 * hidden)});
}

Gru::Trace Gru::forward(const ParamSet& params, const std::vector<double>& x, int T) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    const std::vector<double>& u = params.at(name + ".U").value;
    const std::vector<double>& b = params.at(name + ".b").value;
    check_size(x, static_cast<std::size_t>(T) * in, "gru input");
    const int H = hidden;
    Trace trace;
    trace.h.assign(static_cast<std::size_t>(T) * H, 0.0);
    trace.gates.assign(static_cast<std::size_t>(T) * 3 * H, 0.0);
    std::vector<double> pre(static_cast<std::size_t>(3) * H);
    for (int t = 0; t < T; ++t) {
        const double* xt = x.data() + static_cast<std::size_t>(t) * in;
        const double* h_prev = t > 0 ? trace.h.data() + static_cast<std::size_t>(t - 1) * H
                                     : nullptr;
        for (int j = 0; j < 3 * H; ++j) {
            const double* wp = w.data() + static_cast<std::size_t>(j) * in;
            double acc = b[j];
            for (int i = 0; i < in; ++i) acc += wp[i] * xt[i];
            pre[j] = acc;
        }
        if (h_prev) {  // z and r gates see the raw previous state
            for (int j = 0; j < 2 * H; ++j) {
                const double* up = u.data() + static_cast<std::size_t>(j) * H;
                double acc = 0.0;
                for (int k = 0; k < H; ++k) acc += up[k] * h_prev[k];
                pre[j] += acc;
            }
        }
        double* gates = trace.gates.data() + static_cast<std::size_t>(t) * 3 * H;
        for (int k = 0; k < H; ++k) {
            gates[k] = sigmoid(pre[k]);          // z
            gates[H + k] = sigmoid(pre[H + k]);  // r
        }
        if (h_prev) {  // candidate applies the reset gate to the previous state
            for (int j = 2 * H; j < 3 * H; ++j) {
                const double* up = u.data() + static_cast<std::size_t>(j) * H;
                double acc = 0.0;
                for (int k = 0; k < H; ++k) acc += up[k] * (gates[H + k] * h_prev[k]);
                pre[j] += acc;
            }
        }
        double* ht = trace.h.data() + static_cast<std::size_t>(t) * H;
        for (int k = 0; k < H; ++k) {
            const double n = std::tanh(pre[2 * H + k]);
            gates[2 * H + k] = n;
            const double hp = h_prev ? h_prev[k] : 0.0;
            ht[k] = gates[k] * hp + (1.0 - gates[k]) * n;
        }
    }
    return trace;
}

std::vector<double> Gru::backward(ParamSet& params, const std::vector<double>& x,
                                  const Trace& trace, const std::vector<double>& gh,
                                  int T) const {
    const std::vector<double>& w = params.at(name + ".W").value;
    const std::vector<double>& u = params.at(name + ".U").value;
    std::vector<double>& gw = params.at(name + ".W").grad;
    std::vector<double>& gu = params.at(name + ".U").grad;
    std::vector<double>& gb = params.at(name + ".b").grad;
    const int H = hidden;
    check_size(gh, static_cast<std::size_t>(T) * H, "gru upstream grad");
    std::vector<double> gx(static_cast<std::size_t>(T) * in, 0.0);
    std::vector<double> dh_next(H, 0.0);
    std::vector<double> dz_pre(H), dr_pre(H), dn_pre(H), drh(H), dh_prev(H);
    for (int t = T - 1; t >= 0; --t) {
        const double* gates = trace.gates.data() + static_cast<std::size_t>(t) * 3 * H;
        const double* h_prev = t > 0 ? trace.h.data() + static_cast<std::size_t>(t - 1) * H
                                     : nullptr;
        const double* xt = x.data() + static_cast<std::size_t>(t) * in;
        for (int k = 0; k < H; ++k) {
            const double z = gates[k], r = gates[H + k], n = gates[2 * H + k];
            const double hp = h_prev ? h_prev[k] : 0.0;
            const double dht = gh[static_cast<std::size_t>(t) * H + k] + dh_next[k];
            dz_pre[k] = dht * (hp - n) * z * (1.0 - z);
            dn_pre[k] = dht * (1.0 - z) * (1.0 - n * n);
            dh_prev[k] = dht * z;
        }
        // Gradient reaching (r * h_prev) through the candidate's U term.
        std::fill(drh.begin(), drh.end(), 0.0);
        for (int j = 0; j < H; ++j) {
            const double* up = u.data() + static_cast<std::size_t>(2 * H + j) * H;
            const double g = dn_pre[j];
            for (int k = 0; k < H; ++k) drh[k] += g * up[k];
        }
        for (int k = 0; k < H; ++k) {
            const double r = gates[H + k];
            const double hp = h_prev ? h_prev[k] : 0.0;
            dr_pre[k] = drh[k] * hp * r * (1.0 - r);
            dh_prev[k] += drh[k] * r;
        }
        for (int j = 0; j < 3 * H; ++j) {
            const double g = j < H ? dz_pre[j] : (j < 2 * H ? dr_pre[j - H] : dn_pre[j - 2 * H]);
            gb[j] += g;
            const double* wp = w.data() + static_cast<std::size_t>(j) * in;
            double* gwp = gw.data() + static_cast<std::size_t>(j) * in;
            double* gxt = gx.data() + static_cast<std::size_t>(t) * in;
            for (int i = 0; i < in; ++i) {
                gwp[i] += g * xt[i];
                gxt[i] += g * wp[i];
            }
            if (h_prev) {
                const double* up = u.data() + static_cast<std::size_t>(j) * H;
                double* gup = gu.data() + static_cast<std::size_t>(j) * H;
                for (int k = 0; k < H; ++k) {
                    const double carrier = j < 2 * H ? h_prev[k] : gates[H + k] * h_prev[k];
                    gup[k] += g * carrier;
                    if (j < 2 * H) dh_prev[k] += g * up[k];
                }
            }
        }
        dh_next = dh_prev;
    }
    return gx;
}

}  // namespace sapi
