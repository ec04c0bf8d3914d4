#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "softfail/aging.hpp"

namespace softfail {

/// Windowing of a raw BER trace into (past, future) sequence pairs.
struct WindowSpec {
    double tau_minutes = 90.0;
    std::size_t past_len = 50;    // k; inputs hold k + 1 values
    std::size_t future_len = 70;  // s
    std::size_t stride = 2;
    // Wall-clock minutes covered by one raw trace sample.
    double raw_sample_minutes = 1.0;
    // Keep only the trailing max_tau_samples of the resampled series (0: all).
    std::size_t max_tau_samples = 0;

    std::size_t input_len() const { return past_len + 1; }
    std::size_t width() const { return past_len + 1 + future_len; }
    /// Raw samples per tau window; throws unless tau is a whole multiple.
    std::size_t raw_per_tau() const;
    void validate() const;
};

/// tau-spaced observations plus the raw trace index each one was taken from.
struct TauSeries {
    std::vector<double> values;
    std::vector<std::size_t> raw_index;
    double tau_minutes = 90.0;
};

/// 365 days expressed in tau periods.
double tau_samples_per_year(double tau_minutes);

/// Last sample of each complete window of window_size raw samples.
TauSeries resample(std::span<const double> raw, std::size_t window_size, double tau_minutes);
TauSeries resample(const BerTrace& trace, const WindowSpec& spec);

/// floor((length - width) / stride) + 1, or 0 when length < width.
std::size_t window_count(std::size_t length, std::size_t width, std::size_t stride);

enum class TargetTransform { Raw, Log10 };
enum class NormalizerKind { MinMax, ZScore, None };

const char* to_string(TargetTransform t);
const char* to_string(NormalizerKind k);
TargetTransform parse_transform(const std::string& s);
NormalizerKind parse_normalizer(const std::string& s);

/// Affine value map x -> (x - offset) / scale.
struct Normalizer {
    NormalizerKind kind = NormalizerKind::None;
    double offset = 0.0;
    double scale = 1.0;

    /// Fits on the given values. Z-score on a constant series throws; min-max
    /// on a constant series falls back to the identity and sets degenerate.
    static Normalizer fit(NormalizerKind kind, std::span<const double> values,
                          bool* degenerate = nullptr);

    double apply(double x) const { return (x - offset) / scale; }
    double invert(double y) const { return y * scale + offset; }
};

/// BER <-> model value: optional log10, then the normalizer.
struct Encoding {
    TargetTransform transform = TargetTransform::Raw;
    Normalizer normalizer;

    double transform_ber(double ber) const;
    double untransform(double value) const;
    double encode(double ber) const { return normalizer.apply(transform_ber(ber)); }
    double decode(double y) const { return untransform(normalizer.invert(y)); }
};

/// Contiguous split. Rows [0, fit_end) train the model, [fit_end, train_end)
/// validate it, [train_end, n) are the test rows.
struct SplitRanges {
    std::size_t fit_end = 0;
    std::size_t train_end = 0;
    std::size_t count = 0;

    std::size_t train_size() const { return train_end; }
    std::size_t val_size() const { return train_end - fit_end; }
    std::size_t test_size() const { return count - train_end; }
};

/// Windowed sequences stored row-major, width() values per row: k + 1 inputs
/// followed by s targets, in the transformed (not yet normalized) domain.
struct SequenceDataset {
    WindowSpec window;
    TargetTransform transform = TargetTransform::Raw;
    Normalizer normalizer;
    SplitRanges split;
    bool is_split = false;
    // Rows whose values the normalizer was fitted on: [0, normalizer_rows).
    std::size_t normalizer_rows = 0;
    std::string source_hash;
    // Raw trace index of tau sample 0, and raw samples per tau period.
    std::size_t first_raw_index = 0;
    std::size_t raw_per_tau = 1;
    std::vector<double> rows;

    std::size_t width() const { return window.width(); }
    std::size_t size() const { return width() == 0 ? 0 : rows.size() / width(); }
    std::span<const double> row(std::size_t i) const;
    std::span<const double> input(std::size_t i) const { return row(i).first(window.input_len()); }
    std::span<const double> target(std::size_t i) const {
        return row(i).subspan(window.input_len());
    }
    /// Raw trace index of the last input (the "present" observation) of row i.
    std::size_t present_raw_index(std::size_t i) const;

    Encoding encoding() const { return {transform, normalizer}; }
};

/// Sliding windows over series (values already BER; transform applied here).
SequenceDataset windowize(const TauSeries& series, const WindowSpec& spec,
                          TargetTransform transform);

/// floor-based temporal split; the validation rows are the last
/// val_frac_of_train of the training rows.
SequenceDataset split(SequenceDataset ds, double train_frac, double val_frac_of_train);

/// Fits the normalizer on the training rows only. Requires a split dataset.
SequenceDataset fit_normalizer(SequenceDataset ds, NormalizerKind kind);

struct DatasetOptions {
    TargetTransform transform = TargetTransform::Log10;
    NormalizerKind normalizer = NormalizerKind::MinMax;
    double train_fraction = 0.9;
    double val_fraction_of_train = 0.2;
};

/// resample -> windowize -> split -> fit_normalizer.
SequenceDataset build_dataset(const BerTrace& trace, const WindowSpec& spec,
                              const DatasetOptions& options, const std::string& source_hash);

/// Stable hash of a BER trace's samples and seed.
std::string trace_hash(const BerTrace& trace);

/// Text file: "# key=value" header (window, transform, normalizer, split,
/// provenance) followed by one comma-separated row per sequence.
void write_dataset(const std::string& path, const SequenceDataset& ds);
SequenceDataset read_dataset(const std::string& path);

}  // namespace softfail
