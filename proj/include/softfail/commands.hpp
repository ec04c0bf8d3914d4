#pragma once

#include <iosfwd>
#include <string>

#include "softfail/config.hpp"

namespace softfail::commands {

/// File names used inside RunConfig::out_dir.
struct Artifacts {
    std::string dir;

    std::string path(const std::string& name) const;
    std::string trace() const { return path("trace.csv"); }
    std::string dataset() const { return path("dataset.txt"); }
    std::string model() const { return path("model.txt"); }
    std::string checkpoint() const { return path("checkpoint.txt"); }
    std::string history() const { return path("history.csv"); }
    std::string timing() const { return path("timing.csv"); }
    std::string metrics() const { return path("metrics.csv"); }
    std::string per_pattern() const { return path("per_pattern.csv"); }
    std::string training_curve() const { return path("training_curve.csv"); }
    std::string report_csv() const { return path("report.csv"); }
    std::string report_txt() const { return path("report.txt"); }
};

Artifacts artifacts(const RunConfig& config);

/// Generates (and, if enabled, calibrates) the gain/BER trace. The returned
/// config carries the calibrated units_per_event and SNR penalty.
RunConfig simulate(RunConfig config, std::ostream& log);

void dataset(const RunConfig& config, const std::string& trace_path, std::ostream& log);

struct TrainOptions {
    std::string dataset_path;
    std::string resume_path;  // checkpoint to continue from; empty: fresh
    bool verbose = false;
};
void train(const RunConfig& config, const TrainOptions& options, std::ostream& log);

void evaluate(const RunConfig& config, const std::string& model_path,
              const std::string& dataset_path, std::ostream& log);

struct CompareOptions {
    std::string model_path;
    std::string trace_path;
    // Comma-separated: fixed, fixed:<dB>, prediction, oracle.
    std::string policies = "fixed,prediction";
};
TriggerReport compare(const RunConfig& config, const CompareOptions& options, std::ostream& log);

/// Writes <command>.config.json next to the outputs.
void write_resolved_config(const RunConfig& config, const std::string& command);

}  // namespace softfail::commands
