// softfail: simulate amplifier aging, build datasets, train the forecaster and
// compare repair-trigger policies.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "softfail/commands.hpp"
#include "softfail/error.hpp"

using namespace softfail;

int main(int argc, char** argv) {
    CLI::App app{"Soft-failure forecasting and repair-trigger toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string preset = "paper";
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> samples;
    app.add_option("--preset", preset, "Base configuration: paper | desk")
        ->check(CLI::IsMember({"paper", "desk"}));
    app.add_option("--config", config_path, "JSON configuration applied over the preset");
    app.add_option("--seed", seed, "Trace seed");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--samples", samples, "Raw trace length");

    auto* sim = app.add_subcommand("simulate", "Generate the gain and BER trace");
    bool no_calibrate = false;
    sim->add_flag("--no-calibrate", no_calibrate, "Use units_per_event as configured");

    auto* dat = app.add_subcommand("dataset", "Window a trace into a sequence dataset");
    std::string trace_path;
    dat->add_option("--trace", trace_path, "Trace file (default: <out>/trace.csv)");

    auto* trn = app.add_subcommand("train", "Train the encoder-decoder forecaster");
    commands::TrainOptions train_opts;
    std::optional<std::size_t> epochs;
    trn->add_option("--dataset", train_opts.dataset_path, "Dataset file");
    trn->add_option("--resume", train_opts.resume_path, "Checkpoint to continue from");
    trn->add_option("--epochs", epochs, "Total epochs (overrides the config)");
    trn->add_flag("--verbose", train_opts.verbose, "Print per-epoch losses");

    auto* evl = app.add_subcommand("evaluate", "Per-pattern test loss and training curves");
    std::string model_path;
    std::string dataset_path;
    evl->add_option("--model", model_path, "Model file");
    evl->add_option("--dataset", dataset_path, "Dataset file");

    auto* cmp = app.add_subcommand("compare", "Compare repair-trigger policies on a trace");
    commands::CompareOptions cmp_opts;
    cmp->add_option("--model", cmp_opts.model_path, "Model file");
    cmp->add_option("--trace", cmp_opts.trace_path, "Trace file");
    cmp->add_option("--policies", cmp_opts.policies,
                    "Comma list of fixed, fixed:<dB>, prediction, oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        // Usage errors share the configuration exit code.
        app.exit(e);
        return exit_code(ErrorKind::Config);
    }

    try {
        RunConfig cfg = preset_config(preset);
        if (!config_path.empty()) cfg = load_config_file(std::move(cfg), config_path);
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out_dir = *out_dir;
        if (samples) cfg.aging.horizon_samples = *samples;
        if (epochs) cfg.train.epochs = *epochs;
        if (no_calibrate) cfg.calibration.enabled = false;
        try {
            cfg.finalize();
        } catch (const Error& e) {
            throw Error(ErrorKind::Config, e.what());
        }

        if (sim->parsed()) {
            commands::simulate(cfg, std::cout);
        } else if (dat->parsed()) {
            commands::dataset(cfg, trace_path, std::cout);
        } else if (trn->parsed()) {
            commands::train(cfg, train_opts, std::cout);
        } else if (evl->parsed()) {
            commands::evaluate(cfg, model_path, dataset_path, std::cout);
        } else if (cmp->parsed()) {
            commands::compare(cfg, cmp_opts, std::cout);
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
