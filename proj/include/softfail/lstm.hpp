#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace softfail {

/// Gate order used by every parameter block: input, forget, output, candidate.
enum Gate : std::size_t { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };
inline constexpr std::size_t kGates = 4;

/// Non-owning view of one LSTM cell's weights. U[k] is d x u and W[k] is
/// u x u, both row-major; inputs are row vectors (x U + h W). bias[k] may be
/// null when the cell has no biases.
struct LstmCellView {
    std::size_t input_features = 1;
    std::size_t hidden_units = 0;
    std::array<const double*, kGates> U{};
    std::array<const double*, kGates> W{};
    std::array<const double*, kGates> bias{};
};

/// Owning cell weights, used on their own in tests and tools.
struct LstmCellParams {
    std::size_t input_features = 1;
    std::size_t hidden_units = 0;
    std::array<std::vector<double>, kGates> U;
    std::array<std::vector<double>, kGates> W;
    std::array<std::vector<double>, kGates> bias;  // empty: no bias

    static LstmCellParams zeros(std::size_t d, std::size_t u, bool with_bias = false);
    LstmCellView view() const;
};

struct CellState {
    std::vector<double> h;
    std::vector<double> c;

    static CellState zeros(std::size_t u) { return {std::vector<double>(u), std::vector<double>(u)}; }
};

/// Post-activation gate values of one step (kept for backpropagation).
struct StepTrace {
    std::array<std::vector<double>, kGates> gate;
    std::vector<double> tanh_c;
};

/// One recurrence:
///   i = s(xU_i + hW_i), f = s(xU_f + hW_f), o = s(xU_o + hW_o),
///   g = tanh(xU_g + hW_g), c' = f*c + i*g, h' = tanh(c')*o.
/// Throws Error(InvalidArgument) on shape mismatch.
CellState lstm_step(const LstmCellView& p, std::span<const double> x, const CellState& prev,
                    StepTrace* trace = nullptr);

/// Runs the cell over inputs (n steps of d features, flattened) from a zero
/// state and returns the final state.
CellState encode(const LstmCellView& p, std::span<const double> inputs);

}  // namespace softfail
