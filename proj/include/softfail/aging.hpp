#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "softfail/physics.hpp"

namespace softfail {

/// Amplifier aging as a Weibull power-law point process: the expected number
/// of degradation events by time t is (t / scale_lambda)^shape_beta, and each
/// event removes degradation_step_db * units_per_event dB of gain.
struct WeibullProcessParams {
    double scale_lambda = 595.75;
    double shape_beta = 1.05;
    double degradation_step_db = 1e-6;
    double initial_gain_db = 22.0;
    std::size_t horizon_samples = 1'000'000;
    // Process time units per trace sample.
    double sample_interval = 1.0;
    // Degradation units per event. Found by calibrate_trace.
    double units_per_event = 1.0;

    void validate() const;

    double event_drop_db() const { return degradation_step_db * units_per_event; }
    double horizon_time() const {
        return static_cast<double>(horizon_samples) * sample_interval;
    }
};

/// Gain of the degrading amplifier at samples 0, 1, ... (index implicit).
struct GainTrace {
    std::vector<double> gain_db;
    double sample_interval = 1.0;
    std::uint64_t rng_seed = 0;
    double initial_gain_db = 22.0;
    std::size_t event_count = 0;
    // The gain would have reached 0 dB; samples from that point on are dropped.
    bool truncated = false;

    std::size_t size() const { return gain_db.size(); }
};

struct BerTrace {
    std::vector<double> ber;
    double sample_interval = 1.0;
    std::uint64_t rng_seed = 0;  // seed of the source gain trace

    std::size_t size() const { return ber.size(); }
};

/// Event arrival times in (0, horizon_time()], ascending. Arrivals are
/// lambda * S_n^(1/beta) for the partial sums S_n of standard exponentials.
std::vector<double> sample_event_times(const WeibullProcessParams& params,
                                       std::uint64_t rng_seed);

GainTrace gain_trace(const WeibullProcessParams& params, const std::vector<double>& events,
                     std::uint64_t rng_seed);

/// Both kernels map every gain sample through the physics chain; ber_trace
/// splits the samples across OpenMP threads, ber_trace_serial is the
/// reference loop. Results are bit-identical.
BerTrace ber_trace(const GainTrace& gain, const PhysicalParams& params,
                   const LightpathGeometry& geom);
BerTrace ber_trace_serial(const GainTrace& gain, const PhysicalParams& params,
                          const LightpathGeometry& geom);

/// First index whose value is strictly greater than threshold.
std::optional<std::size_t> first_index_above(const std::vector<double>& values,
                                             double threshold);

struct CalibrationTarget {
    double hard_ber = 1e-3;
    double crossing_fraction = 0.95;
    // When set, the physics SNR penalty is fitted first so that hard_ber is
    // reached at this gain reduction below the initial gain.
    std::optional<double> hard_failure_drop_db;
};

struct Calibration {
    WeibullProcessParams process;
    PhysicalParams physics;
    double critical_gain_db = 0.0;
    std::size_t target_index = 0;
    std::size_t crossing_index = 0;
};

/// Scales units_per_event so that the seeded BER trace first exceeds
/// target.hard_ber within 2% of crossing_fraction * horizon_samples.
/// Throws Error(Calibration) with diagnostics when that is not achievable.
Calibration calibrate_trace(const WeibullProcessParams& process, const PhysicalParams& physics,
                            const LightpathGeometry& geom, const CalibrationTarget& target,
                            std::uint64_t rng_seed);

/// A trace file: gain and BER columns plus free-form header metadata.
struct TraceArtifact {
    GainTrace gain;
    BerTrace ber;
    std::vector<std::pair<std::string, std::string>> meta;

    std::optional<std::string> find_meta(const std::string& key) const;
};

/// Text format: '#'-prefixed "key=value" header lines, a column header
/// "index,gain_db,ber", then one row per sample printed with 17 significant
/// digits so that reading back is bit-exact.
void write_trace(const std::string& path, const TraceArtifact& trace);
TraceArtifact read_trace(const std::string& path);

}  // namespace softfail
