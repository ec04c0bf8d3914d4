#include "softfail/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "softfail/rng.hpp"

namespace softfail {

std::size_t ModelShape::cell_size() const {
    const std::size_t d = input_features;
    const std::size_t u = hidden_units;
    return kGates * (d * u + u * u + (use_bias ? u : 0));
}

std::size_t ModelShape::param_count() const {
    const std::size_t d = input_features;
    const std::size_t u = hidden_units;
    const std::size_t m = dense_units;
    return 2 * cell_size() + u * m + m + m * d + d;
}

void ModelShape::validate() const {
    if (input_features == 0 || hidden_units == 0 || dense_units == 0 || horizon == 0) {
        throw Error(ErrorKind::InvalidArgument,
                    "model shape needs d, u, dense units and horizon >= 1");
    }
}

EdLstmModel::EdLstmModel(const ModelShape& shape) : shape_(shape) {
    shape_.validate();
    params_.assign(shape_.param_count(), 0.0);
}

EdLstmModel EdLstmModel::initialized(const ModelShape& shape, std::uint64_t seed) {
    EdLstmModel model(shape);
    model.seed = seed;
    Rng rng(seed);
    const double cell_bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden_units));
    for (const auto& b : model.blocks()) {
        const bool is_bias = b.name.find(".b") != std::string::npos;
        if (is_bias) continue;
        const double bound = b.name == "dense.W2"
                                 ? 1.0 / std::sqrt(static_cast<double>(shape.dense_units))
                                 : cell_bound;
        for (std::size_t i = 0; i < b.size; ++i) {
            model.params_[b.offset + i] = rng.uniform(-bound, bound);
        }
    }
    return model;
}

std::vector<ParamBlock> EdLstmModel::blocks() const {
    const std::size_t d = shape_.input_features;
    const std::size_t u = shape_.hidden_units;
    const std::size_t m = shape_.dense_units;
    static constexpr const char* kGateName[kGates] = {"i", "f", "o", "g"};
    std::vector<ParamBlock> out;
    std::size_t off = 0;
    for (const char* cell : {"encoder", "decoder"}) {
        for (std::size_t k = 0; k < kGates; ++k) {
            out.push_back({std::string(cell) + ".U_" + kGateName[k], off, d * u});
            off += d * u;
        }
        for (std::size_t k = 0; k < kGates; ++k) {
            out.push_back({std::string(cell) + ".W_" + kGateName[k], off, u * u});
            off += u * u;
        }
        if (shape_.use_bias) {
            for (std::size_t k = 0; k < kGates; ++k) {
                out.push_back({std::string(cell) + ".b_" + kGateName[k], off, u});
                off += u;
            }
        }
    }
    out.push_back({"dense.W1", off, u * m});
    off += u * m;
    out.push_back({"dense.b1", off, m});
    off += m;
    out.push_back({"dense.W2", off, m * d});
    off += m * d;
    out.push_back({"dense.b2", off, d});
    return out;
}

LstmCellView EdLstmModel::cell_view(std::size_t offset) const {
    const std::size_t d = shape_.input_features;
    const std::size_t u = shape_.hidden_units;
    LstmCellView v;
    v.input_features = d;
    v.hidden_units = u;
    const double* base = params_.data() + offset;
    for (std::size_t k = 0; k < kGates; ++k) {
        v.U[k] = base + k * d * u;
        v.W[k] = base + kGates * d * u + k * u * u;
        v.bias[k] = shape_.use_bias ? base + kGates * (d * u + u * u) + k * u : nullptr;
    }
    return v;
}

namespace {

struct DenseView {
    const double* W1;
    const double* b1;
    const double* W2;
    const double* b2;
    std::size_t u, m, d;
};

struct DenseOffsets {
    std::size_t W1, b1, W2, b2;
};

DenseOffsets dense_offsets(const ModelShape& s) {
    const std::size_t base = 2 * s.cell_size();
    const std::size_t u = s.hidden_units;
    const std::size_t m = s.dense_units;
    return {base, base + u * m, base + u * m + m, base + u * m + m + m * s.input_features};
}

DenseView dense_view(const EdLstmModel& model) {
    const auto& s = model.shape();
    const auto off = dense_offsets(s);
    const double* p = model.params().data();
    return {p + off.W1, p + off.b1, p + off.W2, p + off.b2, s.hidden_units, s.dense_units,
            s.input_features};
}

// Hidden activations z and output y of the dense head.
void dense_forward(const DenseView& dv, std::span<const double> h, std::vector<double>& z,
                   std::vector<double>& y) {
    z.assign(dv.b1, dv.b1 + dv.m);
    for (std::size_t r = 0; r < dv.u; ++r) {
        const double hr = h[r];
        const double* row = dv.W1 + r * dv.m;
        for (std::size_t j = 0; j < dv.m; ++j) z[j] += hr * row[j];
    }
    for (auto& v : z) v = std::tanh(v);
    y.assign(dv.b2, dv.b2 + dv.d);
    for (std::size_t j = 0; j < dv.m; ++j) {
        const double zj = z[j];
        const double* row = dv.W2 + j * dv.d;
        for (std::size_t a = 0; a < dv.d; ++a) y[a] += zj * row[a];
    }
}

struct Frame {
    std::vector<double> x;
    CellState prev;
    StepTrace trace;
    // Decoder only.
    std::vector<double> z;
    std::vector<double> y;
};

// Gradient of one cell step. dh and dc hold dL/dh_t and dL/dc_t on entry
// and dL/dh_{t-1}, dL/dc_{t-1} on exit; dx receives dL/dx_t.
void cell_backward(const LstmCellView& p, const Frame& fr, std::vector<double>& dh,
                   std::vector<double>& dc, std::vector<double>& dx, double* grad_cell) {
    const std::size_t d = p.input_features;
    const std::size_t u = p.hidden_units;
    const auto& gi = fr.trace.gate[kInput];
    const auto& gf = fr.trace.gate[kForget];
    const auto& go = fr.trace.gate[kOutput];
    const auto& gg = fr.trace.gate[kCandidate];
    const auto& tc = fr.trace.tanh_c;

    std::array<std::vector<double>, kGates> da;
    for (auto& v : da) v.resize(u);
    std::vector<double> dc_prev(u);
    for (std::size_t j = 0; j < u; ++j) {
        const double d_o = dh[j] * tc[j];
        const double dcj = dh[j] * go[j] * (1.0 - tc[j] * tc[j]) + dc[j];
        const double d_f = dcj * fr.prev.c[j];
        const double d_i = dcj * gg[j];
        const double d_g = dcj * gi[j];
        dc_prev[j] = dcj * gf[j];
        da[kInput][j] = d_i * gi[j] * (1.0 - gi[j]);
        da[kForget][j] = d_f * gf[j] * (1.0 - gf[j]);
        da[kOutput][j] = d_o * go[j] * (1.0 - go[j]);
        da[kCandidate][j] = d_g * (1.0 - gg[j] * gg[j]);
    }

    dx.assign(d, 0.0);
    std::vector<double> dh_prev(u, 0.0);
    for (std::size_t k = 0; k < kGates; ++k) {
        double* gU = grad_cell + k * d * u;
        double* gW = grad_cell + kGates * d * u + k * u * u;
        const auto& a = da[k];
        for (std::size_t r = 0; r < d; ++r) {
            const double xr = fr.x[r];
            const double* Urow = p.U[k] + r * u;
            double acc = 0.0;
            for (std::size_t j = 0; j < u; ++j) {
                gU[r * u + j] += xr * a[j];
                acc += a[j] * Urow[j];
            }
            dx[r] += acc;
        }
        for (std::size_t r = 0; r < u; ++r) {
            const double hr = fr.prev.h[r];
            const double* Wrow = p.W[k] + r * u;
            double acc = 0.0;
            for (std::size_t j = 0; j < u; ++j) {
                gW[r * u + j] += hr * a[j];
                acc += a[j] * Wrow[j];
            }
            dh_prev[r] += acc;
        }
        if (p.bias[k]) {
            double* gb = grad_cell + kGates * (d * u + u * u) + k * u;
            for (std::size_t j = 0; j < u; ++j) gb[j] += a[j];
        }
    }
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
}

}  // namespace

std::vector<double> dense_head(const EdLstmModel& model, std::span<const double> h) {
    if (h.size() != model.shape().hidden_units) {
        throw Error(ErrorKind::InvalidArgument, "dense_head: hidden state has wrong size");
    }
    std::vector<double> z, y;
    dense_forward(dense_view(model), h, z, y);
    return y;
}

std::vector<double> decode(const EdLstmModel& model, const CellState& state, std::size_t horizon) {
    if (horizon == 0) throw Error(ErrorKind::InvalidArgument, "decode: horizon must be >= 1");
    const auto dec = model.decoder();
    const auto dv = dense_view(model);
    const std::size_t d = model.shape().input_features;
    std::vector<double> out;
    out.reserve(horizon * d);
    std::vector<double> x(d, 0.0);
    std::vector<double> z, y;
    CellState s = state;
    for (std::size_t t = 0; t < horizon; ++t) {
        s = lstm_step(dec, x, s);
        dense_forward(dv, s.h, z, y);
        out.insert(out.end(), y.begin(), y.end());
        x = y;
    }
    return out;
}

std::vector<double> forecast(const EdLstmModel& model, std::span<const double> inputs,
                             std::size_t horizon) {
    return decode(model, encode(model.encoder(), inputs), horizon);
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw Error(ErrorKind::InvalidArgument, "mse_loss: length mismatch");
    }
    if (pred.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        acc += e * e;
    }
    return acc / static_cast<double>(pred.size());
}

double example_gradient(const EdLstmModel& model, const Example& ex, std::span<double> grad) {
    const auto& shape = model.shape();
    const std::size_t d = shape.input_features;
    const std::size_t u = shape.hidden_units;
    const std::size_t m = shape.dense_units;
    if (grad.size() != shape.param_count()) {
        throw Error(ErrorKind::InvalidArgument, "gradient buffer has wrong size");
    }
    if (ex.input.empty() || ex.input.size() % d != 0 || ex.target.empty() ||
        ex.target.size() % d != 0) {
        throw Error(ErrorKind::InvalidArgument, "example has ragged input or target");
    }
    std::fill(grad.begin(), grad.end(), 0.0);

    const auto enc = model.encoder();
    const auto dec = model.decoder();
    const auto dv = dense_view(model);
    const std::size_t n_in = ex.input.size() / d;
    const std::size_t n_out = ex.target.size() / d;

    // Forward, keeping every step.
    std::vector<Frame> enc_frames(n_in);
    CellState s = CellState::zeros(u);
    for (std::size_t t = 0; t < n_in; ++t) {
        auto& fr = enc_frames[t];
        fr.x.assign(ex.input.begin() + t * d, ex.input.begin() + (t + 1) * d);
        fr.prev = s;
        s = lstm_step(enc, fr.x, s, &fr.trace);
    }
    std::vector<Frame> dec_frames(n_out);
    std::vector<double> x(d, 0.0);
    std::vector<double> final_h;
    double loss = 0.0;
    for (std::size_t t = 0; t < n_out; ++t) {
        auto& fr = dec_frames[t];
        fr.x = x;
        fr.prev = s;
        s = lstm_step(dec, fr.x, s, &fr.trace);
        dense_forward(dv, s.h, fr.z, fr.y);
        for (std::size_t a = 0; a < d; ++a) {
            const double e = fr.y[a] - ex.target[t * d + a];
            loss += e * e;
        }
        x = fr.y;
    }
    const double scale = 1.0 / static_cast<double>(n_out * d);
    loss *= scale;

    // Backward through the decoder. dx_next carries dL/d(input of step t+1),
    // which is dL/dy_t through the feedback connection.
    const auto doff = dense_offsets(shape);
    double* gW1 = grad.data() + doff.W1;
    double* gb1 = grad.data() + doff.b1;
    double* gW2 = grad.data() + doff.W2;
    double* gb2 = grad.data() + doff.b2;
    double* g_enc = grad.data();
    double* g_dec = grad.data() + shape.cell_size();

    std::vector<double> dh(u, 0.0), dc(u, 0.0), dx_next(d, 0.0), dx;
    std::vector<double> dy(d), dz(m);
    for (std::size_t t = n_out; t-- > 0;) {
        const auto& fr = dec_frames[t];
        // h_t of this step is tanh(c_t) * o_t.
        std::vector<double> h(u);
        for (std::size_t j = 0; j < u; ++j) h[j] = fr.trace.tanh_c[j] * fr.trace.gate[kOutput][j];

        for (std::size_t a = 0; a < d; ++a) {
            dy[a] = 2.0 * scale * (fr.y[a] - ex.target[t * d + a]) + dx_next[a];
            gb2[a] += dy[a];
        }
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                gW2[j * d + a] += fr.z[j] * dy[a];
                acc += dv.W2[j * d + a] * dy[a];
            }
            dz[j] = acc * (1.0 - fr.z[j] * fr.z[j]);
            gb1[j] += dz[j];
        }
        for (std::size_t r = 0; r < u; ++r) {
            double acc = 0.0;
            const double* row = dv.W1 + r * m;
            for (std::size_t j = 0; j < m; ++j) {
                gW1[r * m + j] += h[r] * dz[j];
                acc += row[j] * dz[j];
            }
            dh[r] += acc;
        }
        cell_backward(dec, fr, dh, dc, dx, g_dec);
        // Step 0 consumed the constant dummy input, so its dx is dropped.
        dx_next = dx;
    }

    for (std::size_t t = n_in; t-- > 0;) {
        cell_backward(enc, enc_frames[t], dh, dc, dx, g_enc);
    }
    return loss;
}

namespace {

double reduce_ordered(const std::vector<std::vector<double>>& per_example,
                      const std::vector<double>& losses, std::span<double> grad,
                      std::span<double> losses_out) {
    if (!losses_out.empty()) std::copy(losses.begin(), losses.end(), losses_out.begin());
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < per_example.size(); ++b) {
        const auto& g = per_example[b];
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
        loss += losses[b];
    }
    const double inv = 1.0 / static_cast<double>(per_example.size());
    for (auto& v : grad) v *= inv;
    return loss * inv;
}

void check_batch(const EdLstmModel& model, std::span<const Example> batch,
                 std::span<double> grad, std::span<double> losses) {
    if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
    if (!losses.empty() && losses.size() != batch.size()) {
        throw Error(ErrorKind::InvalidArgument, "loss buffer has wrong size");
    }
    if (grad.size() != model.shape().param_count()) {
        throw Error(ErrorKind::InvalidArgument, "gradient buffer has wrong size");
    }
}

}  // namespace

double batch_gradient(const EdLstmModel& model, std::span<const Example> batch,
                      std::span<double> grad, std::span<double> losses_out) {
    check_batch(model, batch, grad, losses_out);
    const std::size_t n = batch.size();
    const std::size_t p = grad.size();
    std::vector<std::vector<double>> per_example(n, std::vector<double>(p));
    std::vector<double> losses(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n); ++b) {
        const auto i = static_cast<std::size_t>(b);
        losses[i] = example_gradient(model, batch[i], per_example[i]);
    }
    return reduce_ordered(per_example, losses, grad, losses_out);
}

double batch_gradient_serial(const EdLstmModel& model, std::span<const Example> batch,
                             std::span<double> grad, std::span<double> losses_out) {
    check_batch(model, batch, grad, losses_out);
    std::vector<std::vector<double>> per_example;
    std::vector<double> losses;
    for (const auto& ex : batch) {
        per_example.emplace_back(grad.size());
        losses.push_back(example_gradient(model, ex, per_example.back()));
    }
    return reduce_ordered(per_example, losses, grad, losses_out);
}

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 const TrainConfig& config) {
    if (grad.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size()) {
        throw Error(ErrorKind::InvalidArgument, "adam_update: size mismatch");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

}  // namespace softfail
