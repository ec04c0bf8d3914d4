#include "softfail/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "softfail/error.hpp"
#include "textio.hpp"

namespace softfail {

std::size_t WindowSpec::raw_per_tau() const {
    const double ratio = tau_minutes / raw_sample_minutes;
    const double rounded = std::round(ratio);
    if (!(rounded >= 1.0) || std::abs(ratio - rounded) > 1e-9 * rounded) {
        throw Error(ErrorKind::InvalidArgument,
                    "tau_minutes must be a whole multiple of raw_sample_minutes");
    }
    return static_cast<std::size_t>(rounded);
}

void WindowSpec::validate() const {
    if (!(tau_minutes > 0.0) || !(raw_sample_minutes > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "tau and raw sample period must be > 0");
    }
    if (future_len == 0 || stride == 0) {
        throw Error(ErrorKind::InvalidArgument, "future_len and stride must be >= 1");
    }
    (void)raw_per_tau();
}

double tau_samples_per_year(double tau_minutes) { return 365.0 * 24.0 * 60.0 / tau_minutes; }

TauSeries resample(std::span<const double> raw, std::size_t window_size, double tau_minutes) {
    if (raw.empty()) throw Error(ErrorKind::InvalidArgument, "resample: empty trace");
    if (window_size == 0) throw Error(ErrorKind::InvalidArgument, "resample: window size 0");
    if (raw.size() < window_size) {
        throw Error(ErrorKind::InvalidArgument,
                    "resample: trace shorter than one tau window (" + std::to_string(raw.size()) +
                        " < " + std::to_string(window_size) + ")");
    }
    TauSeries out;
    out.tau_minutes = tau_minutes;
    const std::size_t n = raw.size() / window_size;
    out.values.reserve(n);
    out.raw_index.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = (j + 1) * window_size - 1;
        out.values.push_back(raw[idx]);
        out.raw_index.push_back(idx);
    }
    return out;
}

TauSeries resample(const BerTrace& trace, const WindowSpec& spec) {
    spec.validate();
    TauSeries s = resample(trace.ber, spec.raw_per_tau(), spec.tau_minutes);
    if (spec.max_tau_samples > 0 && s.values.size() > spec.max_tau_samples) {
        const auto drop = static_cast<std::ptrdiff_t>(s.values.size() - spec.max_tau_samples);
        s.values.erase(s.values.begin(), s.values.begin() + drop);
        s.raw_index.erase(s.raw_index.begin(), s.raw_index.begin() + drop);
    }
    return s;
}

std::size_t window_count(std::size_t length, std::size_t width, std::size_t stride) {
    if (stride == 0) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
    if (width == 0 || length < width) return 0;
    return (length - width) / stride + 1;
}

const char* to_string(TargetTransform t) { return t == TargetTransform::Log10 ? "log10" : "raw"; }

const char* to_string(NormalizerKind k) {
    switch (k) {
        case NormalizerKind::MinMax: return "min-max";
        case NormalizerKind::ZScore: return "z-score";
        case NormalizerKind::None: return "none";
    }
    return "none";
}

TargetTransform parse_transform(const std::string& s) {
    if (s == "raw") return TargetTransform::Raw;
    if (s == "log10") return TargetTransform::Log10;
    throw Error(ErrorKind::Config, "unknown target transform '" + s + "' (raw|log10)");
}

NormalizerKind parse_normalizer(const std::string& s) {
    if (s == "min-max") return NormalizerKind::MinMax;
    if (s == "z-score") return NormalizerKind::ZScore;
    if (s == "none") return NormalizerKind::None;
    throw Error(ErrorKind::Config, "unknown normalizer '" + s + "' (min-max|z-score|none)");
}

Normalizer Normalizer::fit(NormalizerKind kind, std::span<const double> values, bool* degenerate) {
    Normalizer n;
    n.kind = kind;
    if (degenerate) *degenerate = false;
    if (kind == NormalizerKind::None) return n;
    if (values.empty()) throw Error(ErrorKind::InvalidArgument, "normalizer: no values to fit");

    if (kind == NormalizerKind::MinMax) {
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        if (!(*hi > *lo)) {
            if (degenerate) *degenerate = true;
            return n;  // identity
        }
        n.offset = *lo;
        n.scale = *hi - *lo;
        return n;
    }

    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    if (!(sd > 0.0)) {
        throw Error(ErrorKind::NumericDomain, "z-score normalizer: constant series");
    }
    n.offset = mean;
    n.scale = sd;
    return n;
}

double Encoding::transform_ber(double ber) const {
    if (transform == TargetTransform::Raw) return ber;
    // Guard against underflowed BER values.
    return std::log10(std::max(ber, 1e-300));
}

double Encoding::untransform(double value) const {
    return transform == TargetTransform::Raw ? value : std::pow(10.0, value);
}

std::span<const double> SequenceDataset::row(std::size_t i) const {
    if (i >= size()) throw Error(ErrorKind::InvalidArgument, "dataset row out of range");
    return std::span<const double>(rows).subspan(i * width(), width());
}

std::size_t SequenceDataset::present_raw_index(std::size_t i) const {
    return first_raw_index + (i * window.stride + window.past_len) * raw_per_tau;
}

SequenceDataset windowize(const TauSeries& series, const WindowSpec& spec,
                          TargetTransform transform) {
    spec.validate();
    const std::size_t width = spec.width();
    const std::size_t n = window_count(series.values.size(), width, spec.stride);
    if (n == 0) {
        throw Error(ErrorKind::InvalidArgument,
                    "series too short for windowing: " + std::to_string(series.values.size()) +
                        " < " + std::to_string(width));
    }
    SequenceDataset ds;
    ds.window = spec;
    ds.transform = transform;
    ds.first_raw_index = series.raw_index.empty() ? 0 : series.raw_index.front();
    ds.raw_per_tau = series.raw_index.size() >= 2
                         ? series.raw_index[1] - series.raw_index[0]
                         : spec.raw_per_tau();
    const Encoding enc{transform, {}};
    ds.rows.reserve(n * width);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t start = i * spec.stride;
        for (std::size_t j = 0; j < width; ++j) {
            ds.rows.push_back(enc.transform_ber(series.values[start + j]));
        }
    }
    ds.split = {n, n, n};
    return ds;
}

SequenceDataset split(SequenceDataset ds, double train_frac, double val_frac_of_train) {
    if (!(train_frac > 0.0 && train_frac < 1.0) ||
        !(val_frac_of_train > 0.0 && val_frac_of_train < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "split fractions must lie in (0, 1)");
    }
    const std::size_t n = ds.size();
    // The epsilon keeps products such as 0.9 * 10 from flooring to 8.
    const auto train = static_cast<std::size_t>(std::floor(train_frac * n + 1e-9));
    const auto val = static_cast<std::size_t>(std::floor(val_frac_of_train * train + 1e-9));
    if (train == 0 || train >= n || val == 0 || val >= train) {
        throw Error(ErrorKind::InvalidArgument,
                    "split of " + std::to_string(n) + " sequences leaves an empty range");
    }
    ds.split = {train - val, train, n};
    ds.is_split = true;
    return ds;
}

SequenceDataset fit_normalizer(SequenceDataset ds, NormalizerKind kind) {
    if (!ds.is_split) throw Error(ErrorKind::InvalidArgument, "fit_normalizer: dataset not split");
    const std::size_t rows = ds.split.train_end;
    const std::span<const double> values(ds.rows.data(), rows * ds.width());
    bool degenerate = false;
    ds.normalizer = Normalizer::fit(kind, values, &degenerate);
    if (degenerate) {
        std::cerr << "warning: constant training values, min-max normalizer is the identity\n";
    }
    ds.normalizer_rows = rows;
    return ds;
}

std::string trace_hash(const BerTrace& trace) {
    std::uint64_t h = textio::fnv1a(std::to_string(trace.rng_seed));
    for (double v : trace.ber) {
        h = textio::fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h);
    }
    return textio::hex64(h);
}

SequenceDataset build_dataset(const BerTrace& trace, const WindowSpec& spec,
                              const DatasetOptions& options, const std::string& source_hash) {
    auto ds = windowize(resample(trace, spec), spec, options.transform);
    ds = split(std::move(ds), options.train_fraction, options.val_fraction_of_train);
    ds = fit_normalizer(std::move(ds), options.normalizer);
    ds.source_hash = source_hash;
    return ds;
}

void write_dataset(const std::string& path, const SequenceDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    using textio::fmt_double;
    out << "# softfail-dataset v1\n"
        << "# tau_minutes=" << fmt_double(ds.window.tau_minutes) << '\n'
        << "# past_len=" << ds.window.past_len << '\n'
        << "# future_len=" << ds.window.future_len << '\n'
        << "# stride=" << ds.window.stride << '\n'
        << "# raw_sample_minutes=" << fmt_double(ds.window.raw_sample_minutes) << '\n'
        << "# max_tau_samples=" << ds.window.max_tau_samples << '\n'
        << "# features=1\n"
        << "# transform=" << to_string(ds.transform) << '\n'
        << "# normalizer=" << to_string(ds.normalizer.kind) << '\n'
        << "# normalizer_offset=" << fmt_double(ds.normalizer.offset) << '\n'
        << "# normalizer_scale=" << fmt_double(ds.normalizer.scale) << '\n'
        << "# normalizer_rows=" << ds.normalizer_rows << '\n'
        << "# split=" << (ds.is_split ? 1 : 0) << '\n'
        << "# fit_end=" << ds.split.fit_end << '\n'
        << "# train_end=" << ds.split.train_end << '\n'
        << "# sequences=" << ds.size() << '\n'
        << "# width=" << ds.width() << '\n'
        << "# first_raw_index=" << ds.first_raw_index << '\n'
        << "# raw_per_tau=" << ds.raw_per_tau << '\n'
        << "# source_hash=" << ds.source_hash << '\n';
    std::string line;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        line.clear();
        const auto r = ds.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) line += ',';
            line += fmt_double(r[j]);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

SequenceDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "# softfail-dataset v1") {
        throw Error(ErrorKind::Io, path + ": not a softfail dataset file");
    }
    SequenceDataset ds;
    std::size_t sequences = 0;
    std::size_t width = 0;
    using textio::parse_double;
    auto parse_size = [](const std::string& v) { return textio::parse_int<std::size_t>(v); };
    while (in.peek() == '#' && std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Io, path + ": bad header: " + line);
        const std::string key = line.substr(2, eq - 2);
        const std::string v = line.substr(eq + 1);
        if (key == "tau_minutes") ds.window.tau_minutes = parse_double(v);
        else if (key == "past_len") ds.window.past_len = parse_size(v);
        else if (key == "future_len") ds.window.future_len = parse_size(v);
        else if (key == "stride") ds.window.stride = parse_size(v);
        else if (key == "raw_sample_minutes") ds.window.raw_sample_minutes = parse_double(v);
        else if (key == "max_tau_samples") ds.window.max_tau_samples = parse_size(v);
        else if (key == "features") {
            if (v != "1") throw Error(ErrorKind::Io, path + ": only one feature is supported");
        } else if (key == "transform") ds.transform = parse_transform(v);
        else if (key == "normalizer") ds.normalizer.kind = parse_normalizer(v);
        else if (key == "normalizer_offset") ds.normalizer.offset = parse_double(v);
        else if (key == "normalizer_scale") ds.normalizer.scale = parse_double(v);
        else if (key == "normalizer_rows") ds.normalizer_rows = parse_size(v);
        else if (key == "split") ds.is_split = v == "1";
        else if (key == "fit_end") ds.split.fit_end = parse_size(v);
        else if (key == "train_end") ds.split.train_end = parse_size(v);
        else if (key == "sequences") sequences = parse_size(v);
        else if (key == "width") width = parse_size(v);
        else if (key == "first_raw_index") ds.first_raw_index = parse_size(v);
        else if (key == "raw_per_tau") ds.raw_per_tau = parse_size(v);
        else if (key == "source_hash") ds.source_hash = v;
        else throw Error(ErrorKind::Io, path + ": unknown header key '" + key + "'");
    }
    if (width != ds.window.width()) {
        throw Error(ErrorKind::Io, path + ": width does not match the window spec");
    }
    ds.split.count = sequences;
    ds.rows.reserve(sequences * width);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t start = 0;
        std::size_t fields = 0;
        while (start <= line.size()) {
            auto comma = line.find(',', start);
            if (comma == std::string::npos) comma = line.size();
            ds.rows.push_back(parse_double(std::string_view(line).substr(start, comma - start)));
            ++fields;
            start = comma + 1;
        }
        if (fields != width) throw Error(ErrorKind::Io, path + ": row has wrong width");
    }
    if (ds.size() != sequences) {
        throw Error(ErrorKind::Io, path + ": expected " + std::to_string(sequences) + " rows");
    }
    if (!ds.is_split) ds.split = {sequences, sequences, sequences};
    return ds;
}

}  // namespace softfail
