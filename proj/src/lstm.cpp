#include "softfail/lstm.hpp"

#include <cmath>

#include "softfail/error.hpp"

namespace softfail {

namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

}  // namespace

LstmCellParams LstmCellParams::zeros(std::size_t d, std::size_t u, bool with_bias) {
    LstmCellParams p;
    p.input_features = d;
    p.hidden_units = u;
    for (std::size_t k = 0; k < kGates; ++k) {
        p.U[k].assign(d * u, 0.0);
        p.W[k].assign(u * u, 0.0);
        if (with_bias) p.bias[k].assign(u, 0.0);
    }
    return p;
}

LstmCellView LstmCellParams::view() const {
    LstmCellView v;
    v.input_features = input_features;
    v.hidden_units = hidden_units;
    for (std::size_t k = 0; k < kGates; ++k) {
        if (U[k].size() != input_features * hidden_units ||
            W[k].size() != hidden_units * hidden_units ||
            (!bias[k].empty() && bias[k].size() != hidden_units)) {
            throw Error(ErrorKind::InvalidArgument, "LSTM cell parameter shapes are inconsistent");
        }
        v.U[k] = U[k].data();
        v.W[k] = W[k].data();
        v.bias[k] = bias[k].empty() ? nullptr : bias[k].data();
    }
    return v;
}

CellState lstm_step(const LstmCellView& p, std::span<const double> x, const CellState& prev,
                    StepTrace* trace) {
    const std::size_t d = p.input_features;
    const std::size_t u = p.hidden_units;
    if (x.size() != d || prev.h.size() != u || prev.c.size() != u) {
        throw Error(ErrorKind::InvalidArgument, "lstm_step: shape mismatch");
    }

    std::array<std::vector<double>, kGates> act;
    for (std::size_t k = 0; k < kGates; ++k) {
        auto& a = act[k];
        if (p.bias[k]) {
            a.assign(p.bias[k], p.bias[k] + u);
        } else {
            a.assign(u, 0.0);
        }
        for (std::size_t r = 0; r < d; ++r) {
            const double xr = x[r];
            const double* row = p.U[k] + r * u;
            for (std::size_t j = 0; j < u; ++j) a[j] += xr * row[j];
        }
        for (std::size_t r = 0; r < u; ++r) {
            const double hr = prev.h[r];
            const double* row = p.W[k] + r * u;
            for (std::size_t j = 0; j < u; ++j) a[j] += hr * row[j];
        }
        if (k == kCandidate) {
            for (auto& v : a) v = std::tanh(v);
        } else {
            for (auto& v : a) v = sigmoid(v);
        }
    }

    CellState next{std::vector<double>(u), std::vector<double>(u)};
    std::vector<double> tanh_c(u);
    for (std::size_t j = 0; j < u; ++j) {
        next.c[j] = act[kForget][j] * prev.c[j] + act[kInput][j] * act[kCandidate][j];
        tanh_c[j] = std::tanh(next.c[j]);
        next.h[j] = tanh_c[j] * act[kOutput][j];
    }
    if (trace) {
        trace->gate = std::move(act);
        trace->tanh_c = std::move(tanh_c);
    }
    return next;
}

CellState encode(const LstmCellView& p, std::span<const double> inputs) {
    const std::size_t d = p.input_features;
    if (inputs.empty() || inputs.size() % d != 0) {
        throw Error(ErrorKind::InvalidArgument, "encode: input sequence is empty or ragged");
    }
    CellState state = CellState::zeros(p.hidden_units);
    for (std::size_t t = 0; t < inputs.size(); t += d) {
        state = lstm_step(p, inputs.subspan(t, d), state);
    }
    return state;
}

}  // namespace softfail
