#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "softfail/forecaster.hpp"
#include "softfail/rng.hpp"
#include "textio.hpp"

namespace softfail {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_compatible(const ModelShape& shape, const SequenceDataset& ds) {
    if (shape.input_features != 1) {
        throw Error(ErrorKind::InvalidArgument, "datasets carry a single feature");
    }
    if (shape.past_len != ds.window.past_len || shape.horizon != ds.window.future_len) {
        throw Error(ErrorKind::InvalidArgument,
                    "model (k=" + std::to_string(shape.past_len) +
                        ", s=" + std::to_string(shape.horizon) + ") does not match dataset (k=" +
                        std::to_string(ds.window.past_len) +
                        ", s=" + std::to_string(ds.window.future_len) + ")");
    }
}

Example example_at(const std::vector<double>& rows, const SequenceDataset& ds, std::size_t i) {
    const std::size_t w = ds.width();
    const std::span<const double> r(rows.data() + i * w, w);
    return {r.first(ds.window.input_len()), r.subspan(ds.window.input_len())};
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double mean_forecast_loss(const EdLstmModel& model, const std::vector<double>& rows,
                          const SequenceDataset& ds, std::size_t begin, std::size_t end) {
    std::vector<double> losses(end - begin);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = static_cast<std::ptrdiff_t>(begin); b < static_cast<std::ptrdiff_t>(end);
         ++b) {
        const auto i = static_cast<std::size_t>(b);
        const Example ex = example_at(rows, ds, i);
        losses[i - begin] = mse_loss(forecast(model, ex.input, ex.target.size()), ex.target);
    }
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

}  // namespace

std::vector<double> normalized_rows(const SequenceDataset& ds) {
    std::vector<double> out(ds.rows.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ds.normalizer.apply(ds.rows[i]);
    return out;
}

TrainState start_training(const EdLstmModel& model) {
    TrainState st;
    st.current = model;
    st.best = model;
    st.adam = AdamState::zeros(model.shape().param_count());
    return st;
}

void train(TrainState& st, const SequenceDataset& ds, const TrainConfig& config, bool verbose) {
    check_compatible(st.current.shape(), ds);
    if (!ds.is_split) throw Error(ErrorKind::InvalidArgument, "train: dataset is not split");
    if (config.batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
    const std::size_t fit_end = ds.split.fit_end;
    const std::size_t val_end = ds.split.train_end;
    if (fit_end == 0 || val_end <= fit_end) {
        throw Error(ErrorKind::InvalidArgument, "train: empty training or validation range");
    }

    st.current.encoding = ds.encoding();
    st.best.encoding = ds.encoding();
    const auto rows = normalized_rows(ds);
    const std::size_t p = st.current.shape().param_count();
    std::vector<double> grad(p);
    std::vector<double> row_loss(fit_end);
    std::vector<std::size_t> order(fit_end);
    std::vector<Example> batch;
    std::vector<double> batch_loss;

    for (std::size_t epoch = st.history.epochs.size() + 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(splitmix64(config.seed ^ splitmix64(epoch)));
        for (std::size_t i = fit_end; i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }

        for (std::size_t start = 0; start < fit_end; start += config.batch_size) {
            const std::size_t stop = std::min(fit_end, start + config.batch_size);
            batch.clear();
            for (std::size_t j = start; j < stop; ++j) batch.push_back(example_at(rows, ds, order[j]));
            batch_loss.assign(batch.size(), 0.0);
            const double loss = batch_gradient(st.current, batch, grad, batch_loss);
            if (!std::isfinite(loss) || !all_finite(grad)) {
                throw DivergenceError("non-finite loss or gradient in epoch " +
                                          std::to_string(epoch),
                                      st.history);
            }
            for (std::size_t j = start; j < stop; ++j) row_loss[order[j]] = batch_loss[j - start];
            adam_update(st.current.params(), grad, st.adam, config);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mse =
            std::accumulate(row_loss.begin(), row_loss.end(), 0.0) / static_cast<double>(fit_end);
        rec.val_mse = mean_forecast_loss(st.current, rows, ds, fit_end, val_end);
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(rec.val_mse) || !all_finite(st.current.params())) {
            throw DivergenceError("non-finite validation loss in epoch " + std::to_string(epoch),
                                  st.history);
        }
        st.history.epochs.push_back(rec);
        if (st.history.best_epoch == 0 || rec.val_mse < st.history.best_val_mse) {
            st.history.best_epoch = epoch;
            st.history.best_val_mse = rec.val_mse;
            st.best = st.current;
        }
        if (verbose) {
            std::cerr << "epoch " << epoch << "/" << config.epochs << " train_mse " << rec.train_mse
                      << " val_mse " << rec.val_mse << " (" << rec.seconds << " s)\n";
        }
    }
}

TrainResult train(const SequenceDataset& ds, const ModelShape& shape, const TrainConfig& config,
                  bool verbose) {
    auto model = EdLstmModel::initialized(shape, config.seed);
    model.encoding = ds.encoding();
    TrainState st = start_training(model);
    train(st, ds, config, verbose);
    return {st.best, st.history};
}

std::vector<double> predict(const EdLstmModel& model, std::span<const double> observations_ber,
                            std::size_t horizon) {
    const auto& shape = model.shape();
    if (observations_ber.size() != shape.past_len + 1) {
        throw Error(ErrorKind::InvalidArgument,
                    "predict needs " + std::to_string(shape.past_len + 1) + " observations");
    }
    if (horizon > shape.horizon) {
        std::cerr << "warning: forecasting " << horizon << " steps with a model trained for "
                  << shape.horizon << "\n";
    }
    std::vector<double> x(observations_ber.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = model.encoding.encode(observations_ber[i]);
    auto y = forecast(model, x, horizon);
    for (auto& v : y) v = model.encoding.decode(v);
    return y;
}

Evaluation evaluate(const EdLstmModel& model, const SequenceDataset& ds, std::size_t begin,
                    std::size_t end) {
    check_compatible(model.shape(), ds);
    if (begin >= end || end > ds.size()) {
        throw Error(ErrorKind::InvalidArgument, "evaluate: empty or out-of-range row range");
    }
    const auto rows = normalized_rows(ds);
    const Encoding enc = ds.encoding();
    Evaluation ev;
    ev.patterns.resize(end - begin);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = static_cast<std::ptrdiff_t>(begin); b < static_cast<std::ptrdiff_t>(end);
         ++b) {
        const auto i = static_cast<std::size_t>(b);
        const Example ex = example_at(rows, ds, i);
        const auto pred = forecast(model, ex.input, ex.target.size());
        double ber_acc = 0.0;
        for (std::size_t j = 0; j < pred.size(); ++j) {
            const double e = enc.decode(pred[j]) - enc.decode(ex.target[j]);
            ber_acc += e * e;
        }
        ev.patterns[i - begin] = {i, mse_loss(pred, ex.target),
                                  ber_acc / static_cast<double>(pred.size())};
    }
    for (const auto& p : ev.patterns) {
        ev.mean_normalized += p.mse_normalized;
        ev.mean_ber += p.mse_ber;
    }
    ev.mean_normalized /= static_cast<double>(ev.patterns.size());
    ev.mean_ber /= static_cast<double>(ev.patterns.size());
    return ev;
}

// ---------------------------------------------------------------------------
// Files. A header of key=value lines followed by "[name] count" sections of
// one number per line.

namespace {

using textio::fmt_double;

void write_header(std::ostream& out, const EdLstmModel& model, const TrainConfig& config) {
    const auto& s = model.shape();
    out << "input_features=" << s.input_features << '\n'
        << "hidden_units=" << s.hidden_units << '\n'
        << "dense_units=" << s.dense_units << '\n'
        << "past_len=" << s.past_len << '\n'
        << "horizon=" << s.horizon << '\n'
        << "use_bias=" << (s.use_bias ? 1 : 0) << '\n'
        << "init_seed=" << model.seed << '\n'
        << "transform=" << to_string(model.encoding.transform) << '\n'
        << "normalizer=" << to_string(model.encoding.normalizer.kind) << '\n'
        << "normalizer_offset=" << fmt_double(model.encoding.normalizer.offset) << '\n'
        << "normalizer_scale=" << fmt_double(model.encoding.normalizer.scale) << '\n'
        << "learning_rate=" << fmt_double(config.learning_rate) << '\n'
        << "batch_size=" << config.batch_size << '\n'
        << "epochs=" << config.epochs << '\n'
        << "beta1=" << fmt_double(config.beta1) << '\n'
        << "beta2=" << fmt_double(config.beta2) << '\n'
        << "epsilon=" << fmt_double(config.epsilon) << '\n'
        << "train_seed=" << config.seed << '\n';
}

void write_section(std::ostream& out, const std::string& name, std::span<const double> values) {
    out << '[' << name << "] " << values.size() << '\n';
    for (double v : values) out << fmt_double(v) << '\n';
}

struct ParsedFile {
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<std::pair<std::string, std::vector<double>>> sections;

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : header) {
            if (k == key) return v;
        }
        throw Error(ErrorKind::Io, "missing key '" + key + "'");
    }
    const std::vector<double>& section(const std::string& name) const {
        for (const auto& [k, v] : sections) {
            if (k == name) return v;
        }
        throw Error(ErrorKind::Io, "missing section [" + name + "]");
    }
};

ParsedFile parse_file(const std::string& path, const std::string& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != magic) {
        throw Error(ErrorKind::Io, path + ": expected '" + magic + "'");
    }
    ParsedFile f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos) throw Error(ErrorKind::Io, path + ": bad section");
            const std::string name = line.substr(1, close - 1);
            const auto count = textio::parse_int<std::size_t>(line.substr(close + 2));
            std::vector<double> values;
            values.reserve(count);
            for (std::size_t i = 0; i < count; ++i) {
                if (!std::getline(in, line)) {
                    throw Error(ErrorKind::Io, path + ": section [" + name + "] truncated");
                }
                values.push_back(textio::parse_double(line));
            }
            f.sections.emplace_back(name, std::move(values));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Io, path + ": bad line: " + line);
        f.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return f;
}

EdLstmModel model_from(const ParsedFile& f, const std::string& section, TrainConfig* config) {
    auto sz = [&](const char* k) { return textio::parse_int<std::size_t>(f.get(k)); };
    ModelShape shape;
    shape.input_features = sz("input_features");
    shape.hidden_units = sz("hidden_units");
    shape.dense_units = sz("dense_units");
    shape.past_len = sz("past_len");
    shape.horizon = sz("horizon");
    shape.use_bias = f.get("use_bias") == "1";
    EdLstmModel model(shape);
    model.seed = textio::parse_int<std::uint64_t>(f.get("init_seed"));
    model.encoding.transform = parse_transform(f.get("transform"));
    model.encoding.normalizer.kind = parse_normalizer(f.get("normalizer"));
    model.encoding.normalizer.offset = textio::parse_double(f.get("normalizer_offset"));
    model.encoding.normalizer.scale = textio::parse_double(f.get("normalizer_scale"));
    const auto& values = f.section(section);
    if (values.size() != shape.param_count()) {
        throw Error(ErrorKind::Io, "parameter count does not match the model shape");
    }
    std::copy(values.begin(), values.end(), model.params().begin());
    if (config) {
        config->learning_rate = textio::parse_double(f.get("learning_rate"));
        config->batch_size = sz("batch_size");
        config->epochs = sz("epochs");
        config->beta1 = textio::parse_double(f.get("beta1"));
        config->beta2 = textio::parse_double(f.get("beta2"));
        config->epsilon = textio::parse_double(f.get("epsilon"));
        config->seed = textio::parse_int<std::uint64_t>(f.get("train_seed"));
    }
    return model;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    return out;
}

}  // namespace

void save_model(const std::string& path, const EdLstmModel& model, const TrainConfig& config) {
    auto out = open_out(path);
    out << "softfail-model v1\n";
    out << "byte_order=text-decimal-17g\n";
    write_header(out, model, config);
    write_section(out, "params", model.params());
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

EdLstmModel load_model(const std::string& path, TrainConfig* config) {
    return model_from(parse_file(path, "softfail-model v1"), "params", config);
}

void save_checkpoint(const std::string& path, const TrainState& st, const TrainConfig& config) {
    auto out = open_out(path);
    out << "softfail-checkpoint v1\n";
    write_header(out, st.current, config);
    out << "adam_step=" << st.adam.step << '\n'
        << "best_epoch=" << st.history.best_epoch << '\n'
        << "best_val_mse=" << fmt_double(st.history.best_val_mse) << '\n';
    write_section(out, "params", st.current.params());
    write_section(out, "best_params", st.best.params());
    write_section(out, "adam_m", st.adam.m);
    write_section(out, "adam_v", st.adam.v);
    std::vector<double> hist;
    for (const auto& e : st.history.epochs) {
        hist.push_back(e.train_mse);
        hist.push_back(e.val_mse);
    }
    write_section(out, "history", hist);
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

TrainState load_checkpoint(const std::string& path, TrainConfig* config) {
    const auto f = parse_file(path, "softfail-checkpoint v1");
    TrainState st;
    st.current = model_from(f, "params", config);
    st.best = model_from(f, "best_params", nullptr);
    st.adam.m = f.section("adam_m");
    st.adam.v = f.section("adam_v");
    st.adam.step = textio::parse_int<std::uint64_t>(f.get("adam_step"));
    st.history.best_epoch = textio::parse_int<std::size_t>(f.get("best_epoch"));
    st.history.best_val_mse = textio::parse_double(f.get("best_val_mse"));
    const auto& hist = f.section("history");
    for (std::size_t i = 0; i + 1 < hist.size(); i += 2) {
        st.history.epochs.push_back({i / 2 + 1, hist[i], hist[i + 1], 0.0});
    }
    const std::size_t p = st.current.shape().param_count();
    if (st.adam.m.size() != p || st.adam.v.size() != p) {
        throw Error(ErrorKind::Io, path + ": optimizer state does not match the model");
    }
    return st;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    auto out = open_out(path);
    out << "epoch,train_mse,val_mse\n";
    for (const auto& e : history.epochs) {
        out << e.epoch << ',' << fmt_double(e.train_mse) << ',' << fmt_double(e.val_mse) << '\n';
    }
}

void write_timing_csv(const std::string& path, const TrainHistory& history) {
    auto out = open_out(path);
    out << "epoch,seconds\n";
    for (const auto& e : history.epochs) out << e.epoch << ',' << fmt_double(e.seconds) << '\n';
}

}  // namespace softfail
