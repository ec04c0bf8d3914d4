#include "softfail/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "softfail/error.hpp"
#include "textio.hpp"

namespace softfail::commands {

namespace fs = std::filesystem;

std::string Artifacts::path(const std::string& name) const { return (fs::path(dir) / name).string(); }

Artifacts artifacts(const RunConfig& config) { return {config.out_dir}; }

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

std::string or_default(const std::string& given, const std::string& fallback) {
    return given.empty() ? fallback : given;
}

}  // namespace

void write_resolved_config(const RunConfig& config, const std::string& command) {
    ensure_dir(config.out_dir);
    write_text(artifacts(config).path(command + ".config.json"), config_to_json(config));
}

RunConfig simulate(RunConfig config, std::ostream& log) {
    config.finalize();
    ensure_dir(config.out_dir);
    const auto geom = config.geometry.build(config.physics);

    if (config.calibration.enabled) {
        const auto cal = calibrate_trace(config.aging, config.physics, geom,
                                         config.calibration.target, config.seed);
        config.aging = cal.process;
        config.physics = cal.physics;
        log << "calibrated: units_per_event " << std::setprecision(10)
            << cal.process.units_per_event << ", snr_penalty_db " << cal.physics.snr_penalty_db
            << ", critical gain " << cal.critical_gain_db << " dB, target sample "
            << cal.target_index << ", crossing sample " << cal.crossing_index << '\n';
    }

    const auto events = sample_event_times(config.aging, config.seed);
    TraceArtifact art;
    art.gain = gain_trace(config.aging, events, config.seed);
    art.ber = ber_trace(art.gain, config.physics, geom);
    using textio::fmt_double;
    art.meta = {
        {"scale_lambda", fmt_double(config.aging.scale_lambda)},
        {"shape_beta", fmt_double(config.aging.shape_beta)},
        {"degradation_step_db", fmt_double(config.aging.degradation_step_db)},
        {"units_per_event", fmt_double(config.aging.units_per_event)},
        {"horizon_samples", std::to_string(config.aging.horizon_samples)},
        {"snr_penalty_db", fmt_double(config.physics.snr_penalty_db)},
        {"raw_sample_minutes", fmt_double(config.window.raw_sample_minutes)},
    };
    write_trace(artifacts(config).trace(), art);
    write_resolved_config(config, "simulate");

    const auto hard = first_index_above(art.ber.ber, config.policy.hard_failure.ber_threshold);
    log << "trace: " << art.gain.size() << " samples, " << art.gain.event_count
        << " degradation events, final gain " << std::setprecision(6) << art.gain.gain_db.back()
        << " dB, BER " << art.ber.ber.front() << " -> " << art.ber.ber.back() << '\n';
    if (hard) {
        log << "BER crosses " << config.policy.hard_failure.ber_threshold << " at sample " << *hard
            << " (" << 100.0 * static_cast<double>(*hard) / static_cast<double>(art.gain.size())
            << "% of the trace)\n";
    } else {
        log << "BER stays below " << config.policy.hard_failure.ber_threshold
            << " for the whole trace\n";
    }
    if (art.gain.truncated) log << "gain reached 0 dB; trace truncated\n";
    log << "wrote " << artifacts(config).trace() << '\n';
    return config;
}

void dataset(const RunConfig& config, const std::string& trace_path, std::ostream& log) {
    ensure_dir(config.out_dir);
    const auto trace = read_trace(or_default(trace_path, artifacts(config).trace()));
    const auto ds =
        build_dataset(trace.ber, config.window, config.dataset, trace_hash(trace.ber));
    write_dataset(artifacts(config).dataset(), ds);
    write_resolved_config(config, "dataset");

    std::size_t failing_train_rows = 0;
    for (std::size_t i = 0; i < ds.split.train_end; ++i) {
        for (double v : ds.row(i)) {
            if (ds.encoding().untransform(v) > config.policy.hard_failure.ber_threshold) {
                ++failing_train_rows;
                break;
            }
        }
    }
    log << "dataset: " << ds.size() << " sequences of " << ds.width() << " (k=" << ds.window.past_len
        << ", s=" << ds.window.future_len << ", stride " << ds.window.stride << "); train "
        << ds.split.train_size() << " (validation " << ds.split.val_size() << "), test "
        << ds.split.test_size() << '\n';
    if (failing_train_rows) {
        log << "warning: " << failing_train_rows
            << " training sequences already exceed the hard-failure BER\n";
    }
    log << "wrote " << artifacts(config).dataset() << '\n';
}

void train(const RunConfig& config, const TrainOptions& options, std::ostream& log) {
    ensure_dir(config.out_dir);
    const auto ds = read_dataset(or_default(options.dataset_path, artifacts(config).dataset()));
    TrainState state;
    TrainConfig tc = config.train;
    if (!options.resume_path.empty()) {
        TrainConfig saved;
        state = load_checkpoint(options.resume_path, &saved);
        tc.seed = saved.seed;
        log << "resuming after epoch " << state.history.epochs.size() << '\n';
    } else {
        ModelShape shape = config.model;
        shape.past_len = ds.window.past_len;
        shape.horizon = ds.window.future_len;
        auto model = EdLstmModel::initialized(shape, tc.seed);
        model.encoding = ds.encoding();
        state = start_training(model);
    }
    try {
        softfail::train(state, ds, tc, options.verbose);
    } catch (const DivergenceError& e) {
        write_history_csv(artifacts(config).history(), e.history());
        throw;
    }
    const auto a = artifacts(config);
    save_model(a.model(), state.best, tc);
    save_checkpoint(a.checkpoint(), state, tc);
    write_history_csv(a.history(), state.history);
    write_timing_csv(a.timing(), state.history);
    write_resolved_config(config, "train");
    if (!state.history.epochs.empty()) {
        const auto& first = state.history.epochs.front();
        const auto& last = state.history.epochs.back();
        log << "trained " << state.history.epochs.size() << " epochs: val_mse "
            << std::setprecision(6) << first.val_mse << " -> " << last.val_mse << ", best epoch "
            << state.history.best_epoch << " (" << state.history.best_val_mse << ")\n";
    }
    log << "wrote " << a.model() << '\n';
}

void evaluate(const RunConfig& config, const std::string& model_path,
              const std::string& dataset_path, std::ostream& log) {
    ensure_dir(config.out_dir);
    const auto a = artifacts(config);
    const auto model = load_model(or_default(model_path, a.model()));
    const auto ds = read_dataset(or_default(dataset_path, a.dataset()));
    if (ds.split.test_size() == 0) throw Error(ErrorKind::InvalidArgument, "dataset has no test rows");
    const auto val = evaluate(model, ds, ds.split.fit_end, ds.split.train_end);
    const auto test = evaluate(model, ds, ds.split.train_end, ds.size());

    using textio::fmt_double;
    std::ostringstream metrics;
    metrics << "range,rows,mse_normalized,mse_ber\n"
            << "validation," << val.patterns.size() << ',' << fmt_double(val.mean_normalized) << ','
            << fmt_double(val.mean_ber) << '\n'
            << "test," << test.patterns.size() << ',' << fmt_double(test.mean_normalized) << ','
            << fmt_double(test.mean_ber) << '\n';
    write_text(a.metrics(), metrics.str());

    std::ostringstream per;
    per << "pattern,row,mse_normalized,mse_ber\n";
    for (std::size_t i = 0; i < test.patterns.size(); ++i) {
        const auto& p = test.patterns[i];
        per << i << ',' << p.index << ',' << fmt_double(p.mse_normalized) << ','
            << fmt_double(p.mse_ber) << '\n';
    }
    write_text(a.per_pattern(), per.str());

    if (fs::exists(a.history())) {
        std::ifstream in(a.history(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        write_text(a.training_curve(), ss.str());
    }
    write_resolved_config(config, "evaluate");
    log << "test MSE " << std::setprecision(6) << test.mean_normalized << " (normalized), "
        << test.mean_ber << " (BER units) over " << test.patterns.size() << " sequences\n";
    log << "wrote " << a.metrics() << ", " << a.per_pattern() << '\n';
}

namespace {

struct PolicyToken {
    enum Kind { Fixed, FixedAt, Prediction, Oracle } kind;
    double db = 0.0;
};

std::vector<PolicyToken> parse_policies(const std::string& list) {
    std::vector<PolicyToken> out;
    std::stringstream tokens(list);
    std::string tok;
    while (std::getline(tokens, tok, ',')) {
        if (tok.empty()) continue;
        if (tok == "fixed") {
            out.push_back({PolicyToken::Fixed});
        } else if (tok.rfind("fixed:", 0) == 0) {
            try {
                out.push_back({PolicyToken::FixedAt, textio::parse_double(tok.substr(6))});
            } catch (const Error&) {
                throw Error(ErrorKind::Config, "bad gain reduction in policy '" + tok + "'");
            }
        } else if (tok == "prediction") {
            out.push_back({PolicyToken::Prediction});
        } else if (tok == "oracle") {
            out.push_back({PolicyToken::Oracle});
        } else {
            throw Error(ErrorKind::Config,
                        "unknown policy '" + tok + "' (fixed, fixed:<dB>, prediction, oracle)");
        }
    }
    if (out.empty()) throw Error(ErrorKind::Config, "no policies given");
    return out;
}

}  // namespace

TriggerReport compare(const RunConfig& config, const CompareOptions& options, std::ostream& log) {
    const auto policies = parse_policies(options.policies);
    ensure_dir(config.out_dir);
    const auto a = artifacts(config);
    const auto trace = read_trace(or_default(options.trace_path, a.trace()));
    const auto& spec = config.policy.hard_failure;
    const Timebase time{config.window.raw_sample_minutes};
    const auto hard = hard_failure_time(trace.ber, spec);
    const auto series = resample(trace.ber, config.window);

    std::vector<TriggerEvent> events;
    std::optional<EdLstmModel> model;
    for (const auto& pol : policies) {
        switch (pol.kind) {
            case PolicyToken::Fixed:
                for (double db : config.policy.fixed_reductions_db) {
                    events.push_back(
                        fixed_margin_trigger(trace.gain, trace.ber, db, hard, spec, time));
                }
                break;
            case PolicyToken::FixedAt:
                events.push_back(
                    fixed_margin_trigger(trace.gain, trace.ber, pol.db, hard, spec, time));
                break;
            case PolicyToken::Prediction: {
                if (!model) model = load_model(or_default(options.model_path, a.model()));
                const StreamSpec stream{model->shape().past_len, config.window.future_len,
                                        model->shape().horizon};
                events.push_back(prediction_trigger(model_forecaster(*model), series, trace.gain,
                                                    trace.ber, stream, hard, spec, time));
                break;
            }
            case PolicyToken::Oracle: {
                const StreamSpec stream{config.window.past_len, config.window.future_len, 0};
                events.push_back(prediction_trigger(oracle_forecaster(series), series, trace.gain,
                                                    trace.ber, stream, hard, spec, time,
                                                    "oracle"));
                break;
            }
        }
    }
    const auto report = softfail::compare(hard, time, std::move(events));
    write_text(a.report_csv(), report.to_csv());
    write_text(a.report_txt(), report.to_table());
    write_resolved_config(config, "compare");
    log << report.to_table();
    return report;
}

}  // namespace softfail::commands
