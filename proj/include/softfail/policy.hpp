#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "softfail/aging.hpp"
#include "softfail/dataset.hpp"
#include "softfail/forecaster.hpp"

namespace softfail {

struct HardFailureSpec {
    double ber_threshold = 1e-3;
};

/// First raw index with BER strictly above the threshold; nullopt when the
/// trace never fails within its horizon.
std::optional<std::size_t> hard_failure_time(const BerTrace& trace, const HardFailureSpec& spec);

struct QotMargin {
    double percent = 0.0;
    bool late = false;  // BER already above the threshold
};

/// 100 * (log10(threshold) - log10(ber)) / |log10(threshold)|, or 0 with
/// late set when ber exceeds the threshold.
QotMargin qot_margin_percent(double ber_at_trigger, const HardFailureSpec& spec);

/// Time base shared by every trigger: wall-clock minutes per raw sample.
struct Timebase {
    double raw_sample_minutes = 1.0;

    double days(double raw_samples) const { return raw_samples * raw_sample_minutes / 1440.0; }
};

struct TriggerEvent {
    std::string policy_name;
    bool fired = false;
    std::size_t trigger_sample_index = 0;  // raw trace index
    double trigger_time_days = 0.0;
    double ber_at_trigger = 0.0;
    double gain_reduction_at_trigger_db = 0.0;
    // Hard-failure time minus trigger time; negative when late. Empty if the
    // trace has no hard failure or the policy never fired.
    std::optional<double> lead_time_days;
    double qot_margin_percent = 0.0;
    bool late = false;
};

/// Fires at the first sample whose gain reduction reaches threshold_db.
TriggerEvent fixed_margin_trigger(const GainTrace& gain, const BerTrace& ber,
                                  double threshold_db, std::optional<std::size_t> hard_failure,
                                  const HardFailureSpec& spec, const Timebase& time);

/// Maps (tau index of "now", the k + 1 most recent observations, horizon) to
/// horizon BER forecasts.
using Forecaster = std::function<std::vector<double>(
    std::size_t now, std::span<const double> past, std::size_t horizon)>;

/// Forecaster backed by a trained model.
Forecaster model_forecaster(const EdLstmModel& model);

/// Forecaster that reads the future straight from the series.
Forecaster oracle_forecaster(const TauSeries& series);

struct StreamSpec {
    std::size_t past_len = 50;
    std::size_t horizon = 70;
    // Horizon the forecaster was trained for; 0 skips the check.
    std::size_t forecaster_horizon = 0;
};

/// Walks the tau series from the first full input window and fires at the
/// first step whose forecast contains a BER above the threshold.
TriggerEvent prediction_trigger(const Forecaster& forecaster, const TauSeries& series,
                                const GainTrace& gain, const BerTrace& ber,
                                const StreamSpec& stream, std::optional<std::size_t> hard_failure,
                                const HardFailureSpec& spec, const Timebase& time,
                                std::string name = "prediction");

struct ReportRow {
    std::string policy;
    std::string gain_reduction;
    std::string repair_action;
    std::string qot_margin;
};

struct TriggerReport {
    std::optional<std::size_t> hard_failure_index;
    std::optional<double> hard_failure_days;
    std::vector<TriggerEvent> events;
    std::vector<ReportRow> rows;

    std::string to_csv() const;
    std::string to_table() const;
};

/// Builds the comparison table; fixed-margin events first, then the
/// prediction events, in the order given.
TriggerReport compare(std::optional<std::size_t> hard_failure, const Timebase& time,
                      std::vector<TriggerEvent> events);

}  // namespace softfail
