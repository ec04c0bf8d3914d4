#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softfail/dataset.hpp"
#include "softfail/error.hpp"
#include "softfail/lstm.hpp"

namespace softfail {

struct ModelShape {
    std::size_t input_features = 1;  // d; also the width of every prediction
    std::size_t hidden_units = 30;   // u, shared by encoder and decoder
    std::size_t dense_units = 20;
    std::size_t past_len = 50;       // k; the encoder reads k + 1 values
    std::size_t horizon = 70;        // s
    bool use_bias = false;           // LSTM gate biases

    std::size_t cell_size() const;
    std::size_t param_count() const;
    void validate() const;
};

/// A named slice of the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct TrainConfig {
    double learning_rate = 1e-5;
    std::size_t batch_size = 16;
    std::size_t epochs = 500;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 42;
};

/// Encoder-decoder LSTM with a time-distributed dense head
/// (u -> dense_units with tanh -> d, linear). All weights live in one flat
/// vector; blocks() names each slice.
///
/// Layout: encoder cell, decoder cell, dense W1 (u x m), b1 (m), W2 (m x d),
/// b2 (d). A cell is U_i, U_f, U_o, U_g (d x u each), W_i..W_g (u x u each)
/// and, with use_bias, b_i..b_g (u each).
class EdLstmModel {
public:
    EdLstmModel() = default;
    explicit EdLstmModel(const ModelShape& shape);

    /// Uniform weights in [-1/sqrt(fan), 1/sqrt(fan)]; biases start at zero.
    static EdLstmModel initialized(const ModelShape& shape, std::uint64_t seed);

    const ModelShape& shape() const { return shape_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::vector<ParamBlock> blocks() const;

    LstmCellView encoder() const { return cell_view(0); }
    LstmCellView decoder() const { return cell_view(shape_.cell_size()); }

    Encoding encoding;  // BER <-> model value map used by predict()
    std::uint64_t seed = 0;

private:
    LstmCellView cell_view(std::size_t offset) const;

    ModelShape shape_;
    std::vector<double> params_;
};

/// Dense head applied to one hidden state.
std::vector<double> dense_head(const EdLstmModel& model, std::span<const double> h);

/// Recursive decoder: the first input is the zero dummy, each later input is
/// the previous prediction. Returns horizon * d values.
std::vector<double> decode(const EdLstmModel& model, const CellState& state, std::size_t horizon);

/// encode + decode in the model's normalized value domain.
std::vector<double> forecast(const EdLstmModel& model, std::span<const double> inputs,
                             std::size_t horizon);

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// One training example in the normalized domain.
struct Example {
    std::span<const double> input;   // (k + 1) * d
    std::span<const double> target;  // s * d
};

/// Loss of one example and the exact gradient of that loss with respect to
/// every parameter (backpropagation through time, including the decoder's
/// feedback path). grad must have param_count() entries and is overwritten.
double example_gradient(const EdLstmModel& model, const Example& ex, std::span<double> grad);

/// Mean loss over the batch and the gradient of that mean. The OpenMP kernel
/// computes examples in parallel and sums them in batch order, so it is
/// bit-identical to the serial reference.
/// losses, when non-empty, receives each example's own loss.
double batch_gradient(const EdLstmModel& model, std::span<const Example> batch,
                      std::span<double> grad, std::span<double> losses = {});
double batch_gradient_serial(const EdLstmModel& model, std::span<const Example> batch,
                             std::span<double> grad, std::span<double> losses = {});

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    static AdamState zeros(std::size_t n) { return {std::vector<double>(n), std::vector<double>(n), 0}; }
};

/// Bias-corrected Adam step.
void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
};

/// Everything needed to continue training bit-for-bit.
struct TrainState {
    EdLstmModel current;
    EdLstmModel best;
    AdamState adam;
    TrainHistory history;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, TrainHistory history)
        : Error(ErrorKind::Divergence, what), history_(std::move(history)) {}
    const TrainHistory& history() const { return history_; }

private:
    TrainHistory history_;
};

/// Fresh training state for a model.
TrainState start_training(const EdLstmModel& model);

/// Runs epochs until config.epochs have completed. Each epoch shuffles the
/// fit rows with a generator seeded from (config.seed, epoch), so a resumed
/// state continues exactly as an uninterrupted run would. The best-validation
/// weights are kept in state.best. Throws DivergenceError on non-finite
/// losses or gradients.
void train(TrainState& state, const SequenceDataset& ds, const TrainConfig& config,
           bool verbose = false);

/// Convenience wrapper: initializes from the dataset and returns the best
/// checkpoint.
struct TrainResult {
    EdLstmModel model;
    TrainHistory history;
};
TrainResult train(const SequenceDataset& ds, const ModelShape& shape, const TrainConfig& config,
                  bool verbose = false);

/// Normalized copy of a dataset's rows.
std::vector<double> normalized_rows(const SequenceDataset& ds);

/// BER forecast: observations (k + 1 BER values) are encoded, run through the
/// network and decoded back to BER. A horizon beyond the trained one is
/// allowed and reported on stderr.
std::vector<double> predict(const EdLstmModel& model, std::span<const double> observations_ber,
                            std::size_t horizon);

struct PatternLoss {
    std::size_t index = 0;  // row index in the dataset
    double mse_normalized = 0.0;
    double mse_ber = 0.0;
};

struct Evaluation {
    std::vector<PatternLoss> patterns;
    double mean_normalized = 0.0;
    double mean_ber = 0.0;
};

/// Per-row MSE over rows [begin, end), normalized and in BER units.
Evaluation evaluate(const EdLstmModel& model, const SequenceDataset& ds, std::size_t begin,
                    std::size_t end);

void save_model(const std::string& path, const EdLstmModel& model, const TrainConfig& config);
EdLstmModel load_model(const std::string& path, TrainConfig* config = nullptr);

void save_checkpoint(const std::string& path, const TrainState& state, const TrainConfig& config);
TrainState load_checkpoint(const std::string& path, TrainConfig* config = nullptr);

/// CSV "epoch,train_mse,val_mse". Deterministic for a seeded run.
void write_history_csv(const std::string& path, const TrainHistory& history);
/// CSV "epoch,seconds" with the wall-clock time of each epoch.
void write_timing_csv(const std::string& path, const TrainHistory& history);

}  // namespace softfail
