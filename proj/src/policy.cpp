#include "softfail/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "softfail/error.hpp"

namespace softfail {

std::optional<std::size_t> hard_failure_time(const BerTrace& trace, const HardFailureSpec& spec) {
    if (trace.ber.empty()) throw Error(ErrorKind::InvalidArgument, "empty BER trace");
    return first_index_above(trace.ber, spec.ber_threshold);
}

QotMargin qot_margin_percent(double ber_at_trigger, const HardFailureSpec& spec) {
    if (!(spec.ber_threshold > 0.0 && spec.ber_threshold < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "BER threshold must lie in (0, 1)");
    }
    if (!(ber_at_trigger > 0.0)) {
        throw Error(ErrorKind::NumericDomain, "BER at trigger must be > 0");
    }
    if (ber_at_trigger > spec.ber_threshold) return {0.0, true};
    const double lt = std::log10(spec.ber_threshold);
    return {100.0 * (lt - std::log10(ber_at_trigger)) / std::abs(lt), false};
}

namespace {

void finish_event(TriggerEvent& ev, const GainTrace& gain, const BerTrace& ber,
                  std::optional<std::size_t> hard_failure, const HardFailureSpec& spec,
                  const Timebase& time) {
    const std::size_t i = ev.trigger_sample_index;
    ev.trigger_time_days = time.days(static_cast<double>(i));
    ev.ber_at_trigger = ber.ber[i];
    ev.gain_reduction_at_trigger_db = gain.initial_gain_db - gain.gain_db[i];
    if (hard_failure) {
        ev.lead_time_days =
            time.days(static_cast<double>(*hard_failure) - static_cast<double>(i));
    }
    // A trigger at or after the failure sample is late.
    const auto margin = qot_margin_percent(ev.ber_at_trigger, spec);
    ev.qot_margin_percent = margin.percent;
    ev.late = margin.late || (hard_failure && i >= *hard_failure);
    if (ev.late) ev.qot_margin_percent = 0.0;
}

void check_traces(const GainTrace& gain, const BerTrace& ber) {
    if (gain.size() != ber.size() || gain.size() == 0) {
        throw Error(ErrorKind::InvalidArgument, "gain and BER traces must be non-empty and aligned");
    }
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

TriggerEvent fixed_margin_trigger(const GainTrace& gain, const BerTrace& ber,
                                  double threshold_db, std::optional<std::size_t> hard_failure,
                                  const HardFailureSpec& spec, const Timebase& time) {
    check_traces(gain, ber);
    if (!(threshold_db > 0.0 && threshold_db < gain.initial_gain_db)) {
        throw Error(ErrorKind::InvalidArgument, "gain-reduction threshold must lie in (0, initial gain)");
    }
    TriggerEvent ev;
    ev.policy_name = "fixed " + fmt("%g", threshold_db) + " dB";
    for (std::size_t i = 0; i < gain.size(); ++i) {
        if (gain.initial_gain_db - gain.gain_db[i] >= threshold_db) {
            ev.fired = true;
            ev.trigger_sample_index = i;
            break;
        }
    }
    if (ev.fired) finish_event(ev, gain, ber, hard_failure, spec, time);
    return ev;
}

Forecaster model_forecaster(const EdLstmModel& model) {
    return [&model](std::size_t, std::span<const double> past, std::size_t horizon) {
        return predict(model, past, horizon);
    };
}

Forecaster oracle_forecaster(const TauSeries& series) {
    return [&series](std::size_t now, std::span<const double>, std::size_t horizon) {
        const std::size_t begin = std::min(now + 1, series.values.size());
        const std::size_t end = std::min(now + 1 + horizon, series.values.size());
        return std::vector<double>(series.values.begin() + static_cast<std::ptrdiff_t>(begin),
                                   series.values.begin() + static_cast<std::ptrdiff_t>(end));
    };
}

TriggerEvent prediction_trigger(const Forecaster& forecaster, const TauSeries& series,
                                const GainTrace& gain, const BerTrace& ber,
                                const StreamSpec& stream, std::optional<std::size_t> hard_failure,
                                const HardFailureSpec& spec, const Timebase& time,
                                std::string name) {
    check_traces(gain, ber);
    if (stream.horizon == 0) throw Error(ErrorKind::Config, "prediction horizon must be >= 1");
    if (stream.forecaster_horizon != 0 && stream.horizon > stream.forecaster_horizon) {
        throw Error(ErrorKind::Config,
                    "requested horizon " + std::to_string(stream.horizon) +
                        " exceeds the forecaster's trained horizon " +
                        std::to_string(stream.forecaster_horizon));
    }
    TriggerEvent ev;
    ev.policy_name = std::move(name);
    const std::size_t k = stream.past_len;
    for (std::size_t now = k; now < series.values.size(); ++now) {
        const std::span<const double> past(series.values.data() + now - k, k + 1);
        const auto future = forecaster(now, past, stream.horizon);
        const bool alarm = std::any_of(future.begin(), future.end(),
                                       [&](double b) { return b > spec.ber_threshold; });
        if (alarm) {
            ev.fired = true;
            ev.trigger_sample_index = series.raw_index[now];
            break;
        }
    }
    if (ev.fired) finish_event(ev, gain, ber, hard_failure, spec, time);
    return ev;
}

TriggerReport compare(std::optional<std::size_t> hard_failure, const Timebase& time,
                      std::vector<TriggerEvent> events) {
    TriggerReport rep;
    rep.hard_failure_index = hard_failure;
    if (hard_failure) rep.hard_failure_days = time.days(static_cast<double>(*hard_failure));
    std::stable_partition(events.begin(), events.end(), [](const TriggerEvent& e) {
        return e.policy_name.rfind("fixed", 0) == 0;
    });
    for (const auto& e : events) {
        ReportRow row;
        row.policy = e.policy_name;
        if (!e.fired) {
            row.gain_reduction = "-";
            row.repair_action = "No trigger";
            row.qot_margin = "-";
        } else {
            row.gain_reduction = fmt("%.2f dB", e.gain_reduction_at_trigger_db);
            if (e.late) {
                row.repair_action = "Hard-failure occurred";
                row.qot_margin = "Hard-failure occurred";
            } else {
                row.repair_action = e.lead_time_days ? fmt("%.2f days ahead", *e.lead_time_days)
                                                     : std::string("No hard failure in horizon");
                row.qot_margin = fmt("%.2f%%", e.qot_margin_percent);
            }
        }
        rep.rows.push_back(std::move(row));
    }
    rep.events = std::move(events);
    return rep;
}

std::string TriggerReport::to_csv() const {
    std::ostringstream out;
    out << "policy,gain_reduction_db,trigger_sample,lead_time_days,ber_at_trigger,qot_margin_percent,"
           "late\n";
    char buf[64];
    for (const auto& e : events) {
        out << e.policy_name << ',';
        if (e.fired) {
            std::snprintf(buf, sizeof buf, "%.17g", e.gain_reduction_at_trigger_db);
            out << buf << ',' << e.trigger_sample_index << ',';
            if (e.lead_time_days) {
                std::snprintf(buf, sizeof buf, "%.17g", *e.lead_time_days);
                out << buf;
            }
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", e.ber_at_trigger, e.qot_margin_percent);
            out << buf << (e.late ? 1 : 0) << '\n';
        } else {
            out << ",,,,,\n";
        }
    }
    return out.str();
}

std::string TriggerReport::to_table() const {
    const std::vector<std::string> head = {"Policy", "Gain Reduction", "Repair Action",
                                           "QoT Margin"};
    std::vector<std::size_t> w(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) w[c] = head[c].size();
    for (const auto& r : rows) {
        const std::string* cells[] = {&r.policy, &r.gain_reduction, &r.repair_action, &r.qot_margin};
        for (std::size_t c = 0; c < head.size(); ++c) w[c] = std::max(w[c], cells[c]->size());
    }
    std::ostringstream out;
    auto line = [&](const std::string* cells[]) {
        for (std::size_t c = 0; c < head.size(); ++c) {
            out << (c ? " | " : "") << *cells[c] << std::string(w[c] - cells[c]->size(), ' ');
        }
        out << '\n';
    };
    const std::string* hc[] = {&head[0], &head[1], &head[2], &head[3]};
    line(hc);
    std::size_t total = 3 * (head.size() - 1);
    for (auto x : w) total += x;
    out << std::string(total, '-') << '\n';
    for (const auto& r : rows) {
        const std::string* cells[] = {&r.policy, &r.gain_reduction, &r.repair_action, &r.qot_margin};
        line(cells);
    }
    if (hard_failure_days) {
        out << "hard failure at sample " << *hard_failure_index << " (day "
            << fmt("%.2f", *hard_failure_days) << ")\n";
    } else {
        out << "no hard failure within the trace horizon\n";
    }
    return out.str();
}

}  // namespace softfail
