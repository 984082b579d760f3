#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sapi/serialize.hpp"

namespace sapi {

// One named, learnable tensor with its gradient accumulator. Data is
// row-major double precision; checkpoints narrow to 32-bit floats.
struct ParamBlock {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t fan_in = 0;  // scale for init; 0 means zero-initialized (bias)
    std::vector<double> value;
    std::vector<double> grad;

    std::size_t size() const { return value.size(); }
};

// Registry of all parameters of a model. Insertion order fixes the
// initialization draw order; lookups are by name.
class ParamSet {
public:
    // fan_in = 0 and a 1-D shape mark a bias (zero-initialized); otherwise a
    // missing fan_in defaults to the product of all but the leading dim.
    ParamBlock& create(const std::string& name, std::vector<std::size_t> shape,
                       std::size_t fan_in_override = SIZE_MAX);
    ParamBlock& at(const std::string& name);
    const ParamBlock& at(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<ParamBlock>& blocks() { return blocks_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }

    void zero_grads();
    std::size_t total_size() const;
    bool all_finite() const;  // values and gradients

private:
    std::vector<ParamBlock> blocks_;
    std::map<std::string, std::size_t> index_;
};

// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases zero. Deterministic in
// the seed and the block insertion order.
void init_uniform_fan_in(ParamSet& params, std::uint64_t seed);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
};

void adam_step(ParamSet& params, AdamState& state, double learning_rate);

// Checkpoint directory: manifest.json (schema, seed, caller-supplied extra
// JSON, parameter names/shapes) + one float32 blob per parameter.
void save_params(const std::filesystem::path& dir, const ParamSet& params,
                 std::uint64_t seed, const Json& extra);
struct LoadedParams {
    ParamSet params;
    std::uint64_t seed = 0;
    Json extra;
};
LoadedParams load_params(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Layers. Tensors are flat double vectors with explicit dims; every backward
// takes the forward input (and the upstream gradient) and accumulates into
// ParamBlock::grad, returning the input gradient.
// ---------------------------------------------------------------------------

// 3-D convolution over [T, C, H, W] (stride 1, zero padding). kt=1 degrades
// to a per-slice 2-D conv; H=W=1 degrades to a 1-D conv over T.
struct Conv3d {
    std::string name;
    int in_ch = 1, out_ch = 1;
    int kt = 1, kh = 1, kw = 1;
    int pt = 0, ph = 0, pw = 0;

    void create_params(ParamSet& params) const;
    int out_t(int T) const { return T + 2 * pt - kt + 1; }
    int out_h(int H) const { return H + 2 * ph - kh + 1; }
    int out_w(int W) const { return W + 2 * pw - kw + 1; }

    std::vector<double> forward(const ParamSet& params, const std::vector<double>& x, int T,
                                int H, int W) const;
    std::vector<double> backward(ParamSet& params, const std::vector<double>& x,
                                 const std::vector<double>& gy, int T, int H, int W) const;
};

// Non-overlapping average pooling over [T, C, H, W]; every window dim must
// divide its axis.
struct AvgPool3d {
    int wt = 1, wh = 1, ww = 1;

    std::vector<double> forward(const std::vector<double>& x, int T, int C, int H,
                                int W) const;
    std::vector<double> backward(const std::vector<double>& gy, int T, int C, int H,
                                 int W) const;
};

// Max pooling over the time axis of [T, C], window = stride = 2. Ties resolve
// to the earlier step.
struct MaxPool1d {
    std::vector<double> forward(const std::vector<double>& x, int T, int C) const;
    std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& gy,
                                 int T, int C) const;
};

// Fully connected layer applied to each of `rows` feature vectors.
struct Fc {
    std::string name;
    int in = 1, out = 1;

    void create_params(ParamSet& params) const;
    std::vector<double> forward(const ParamSet& params, const std::vector<double>& x,
                                int rows) const;
    std::vector<double> backward(ParamSet& params, const std::vector<double>& x,
                                 const std::vector<double>& gy, int rows) const;
};

std::vector<double> relu(const std::vector<double>& x);
std::vector<double> relu_backward(const std::vector<double>& x, const std::vector<double>& gy);

// LSTM over [T, in] with zero initial state; gate order (i, f, g, o), one
// shared bias per gate stack.
struct Lstm {
    std::string name;
    int in = 1, hidden = 1;

    struct Trace {
        std::vector<double> h;      // [T, H]
        std::vector<double> c;      // [T, H]
        std::vector<double> gates;  // [T, 4H] post-activation
    };

    void create_params(ParamSet& params) const;
    Trace forward(const ParamSet& params, const std::vector<double>& x, int T) const;
    // gh: gradient on every hidden output [T, H].
    std::vector<double> backward(ParamSet& params, const std::vector<double>& x,
                                 const Trace& trace, const std::vector<double>& gh,
                                 int T) const;
};

// GRU over [T, in], zero initial state, gate order (z, r, n); the reset gate
// multiplies the previous hidden state before the candidate's U term.
struct Gru {
    std::string name;
    int in = 1, hidden = 1;

    struct Trace {
        std::vector<double> h;      // [T, H]
        std::vector<double> gates;  // [T, 3H] post-activation
    };

    void create_params(ParamSet& params) const;
    Trace forward(const ParamSet& params, const std::vector<double>& x, int T) const;
    std::vector<double> backward(ParamSet& params, const std::vector<double>& x,
                                 const Trace& trace, const std::vector<double>& gh,
                                 int T) const;
};

}  // namespace sapi
