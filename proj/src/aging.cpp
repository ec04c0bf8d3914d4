#include "softfail/aging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "softfail/error.hpp"
#include "softfail/rng.hpp"
#include "textio.hpp"

namespace softfail {

void WeibullProcessParams::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(scale_lambda) || !positive(shape_beta) || !positive(degradation_step_db) ||
        !positive(initial_gain_db) || !positive(sample_interval) || !positive(units_per_event)) {
        throw Error(ErrorKind::InvalidArgument,
                    "Weibull process parameters must all be finite and > 0");
    }
}

std::vector<double> sample_event_times(const WeibullProcessParams& params,
                                       std::uint64_t rng_seed) {
    params.validate();
    const double horizon = params.horizon_time();
    std::vector<double> times;
    if (horizon <= 0.0) return times;
    Rng rng(rng_seed);
    const double inv_beta = 1.0 / params.shape_beta;
    double cumulative = 0.0;
    for (;;) {
        cumulative += rng.exponential();
        const double t = params.scale_lambda * std::pow(cumulative, inv_beta);
        if (t > horizon) break;
        times.push_back(t);
    }
    return times;
}

GainTrace gain_trace(const WeibullProcessParams& params, const std::vector<double>& events,
                     std::uint64_t rng_seed) {
    params.validate();
    if (!std::is_sorted(events.begin(), events.end())) {
        throw Error(ErrorKind::InvalidArgument, "event times must be sorted ascending");
    }
    GainTrace trace;
    trace.sample_interval = params.sample_interval;
    trace.rng_seed = rng_seed;
    trace.initial_gain_db = params.initial_gain_db;
    trace.gain_db.reserve(params.horizon_samples);

    const double drop = params.event_drop_db();
    std::size_t next = 0;
    for (std::size_t n = 0; n < params.horizon_samples; ++n) {
        const double t = static_cast<double>(n) * params.sample_interval;
        while (next < events.size() && events[next] <= t) ++next;
        const double g = params.initial_gain_db - drop * static_cast<double>(next);
        if (g <= 0.0) {
            trace.truncated = true;
            break;
        }
        trace.gain_db.push_back(g);
        trace.event_count = next;
    }
    return trace;
}

namespace {

struct GainToBer {
    const PhysicalParams& params;
    const LightpathGeometry& geom;
    LinkState state;

    GainToBer(const GainTrace& gain, const PhysicalParams& p, const LightpathGeometry& g)
        : params(p), geom(g), state(nominal_state(p, g, gain.initial_gain_db)) {
        p.validate();
        g.validate(p);
    }

    double operator()(double gain_db) const {
        LinkState s = state;
        s.inline_gain_degraded_db = gain_db;
        return ber_of_state(params, geom, s);
    }
};

}  // namespace

BerTrace ber_trace(const GainTrace& gain, const PhysicalParams& params,
                   const LightpathGeometry& geom) {
    const GainToBer map(gain, params, geom);
    BerTrace out;
    out.sample_interval = gain.sample_interval;
    out.rng_seed = gain.rng_seed;
    out.ber.resize(gain.size());
    const auto n = static_cast<std::ptrdiff_t>(gain.size());
    const double* in = gain.gain_db.data();
    double* dst = out.ber.data();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = map(in[i]);
    return out;
}

BerTrace ber_trace_serial(const GainTrace& gain, const PhysicalParams& params,
                          const LightpathGeometry& geom) {
    const GainToBer map(gain, params, geom);
    BerTrace out;
    out.sample_interval = gain.sample_interval;
    out.rng_seed = gain.rng_seed;
    out.ber.reserve(gain.size());
    for (double g : gain.gain_db) out.ber.push_back(map(g));
    return out;
}

std::optional<std::size_t> first_index_above(const std::vector<double>& values,
                                             double threshold) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] > threshold) return i;
    }
    return std::nullopt;
}

Calibration calibrate_trace(const WeibullProcessParams& process, const PhysicalParams& physics,
                            const LightpathGeometry& geom, const CalibrationTarget& target,
                            std::uint64_t rng_seed) {
    process.validate();
    if (!(target.hard_ber > 0.0 && target.hard_ber < 0.5)) {
        throw Error(ErrorKind::Calibration, "hard_ber must lie in (0, 0.5)");
    }
    if (!(target.crossing_fraction > 0.5 && target.crossing_fraction <= 1.0)) {
        throw Error(ErrorKind::Calibration, "crossing_fraction must lie in (0.5, 1]");
    }
    if (process.horizon_samples < 2) {
        throw Error(ErrorKind::Calibration, "horizon too short to calibrate");
    }

    Calibration cal;
    cal.process = process;
    cal.physics = physics;
    if (target.hard_failure_drop_db) {
        cal.physics.snr_penalty_db = calibrate_snr_penalty_db(
            physics, geom, process.initial_gain_db, target.hard_ber, *target.hard_failure_drop_db);
    }
    cal.critical_gain_db =
        critical_gain_db(cal.physics, geom, process.initial_gain_db, target.hard_ber);
    const double required_drop = process.initial_gain_db - cal.critical_gain_db;

    const auto horizon = process.horizon_samples;
    cal.target_index = std::min<std::size_t>(
        static_cast<std::size_t>(std::llround(target.crossing_fraction * horizon)), horizon - 1);

    // The BER exceeds hard_ber once the gain falls below the critical gain, i.e.
    // once the event count c satisfies c * drop_per_event > required_drop.
    // Placing required_drop half an event below the count reached at the target
    // sample makes that count the first to cross.
    const auto events = sample_event_times(process, rng_seed);
    const double target_time = static_cast<double>(cal.target_index) * process.sample_interval;
    const auto count_at_target = static_cast<std::size_t>(
        std::upper_bound(events.begin(), events.end(), target_time) - events.begin());
    if (count_at_target == 0) {
        throw Error(ErrorKind::Calibration,
                    "no degradation events before the target crossing sample " +
                        std::to_string(cal.target_index));
    }
    const double units = required_drop / (process.degradation_step_db *
                                          (static_cast<double>(count_at_target) - 0.5));
    cal.process.units_per_event = units;

    const auto gain = gain_trace(cal.process, events, rng_seed);
    const auto ber = ber_trace(gain, cal.physics, geom);
    const auto crossing = first_index_above(ber.ber, target.hard_ber);
    const double tolerance = 0.02 * static_cast<double>(horizon);
    if (!crossing || std::abs(static_cast<double>(*crossing) -
                              static_cast<double>(cal.target_index)) > tolerance) {
        std::ostringstream msg;
        msg << "calibration missed target: target sample " << cal.target_index << ", crossing "
            << (crossing ? std::to_string(*crossing) : std::string("none")) << ", events "
            << events.size() << ", events by target " << count_at_target
            << ", required drop " << required_drop << " dB";
        throw Error(ErrorKind::Calibration, msg.str());
    }
    cal.crossing_index = *crossing;
    return cal;
}

std::optional<std::string> TraceArtifact::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta) {
        if (k == key) return v;
    }
    return std::nullopt;
}

void write_trace(const std::string& path, const TraceArtifact& trace) {
    if (trace.gain.size() != trace.ber.size()) {
        throw Error(ErrorKind::InvalidArgument, "gain and BER traces differ in length");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    out << "# softfail-trace v1\n";
    out << "# rng_seed=" << trace.gain.rng_seed << '\n';
    out << "# sample_interval=" << textio::fmt_double(trace.gain.sample_interval) << '\n';
    out << "# initial_gain_db=" << textio::fmt_double(trace.gain.initial_gain_db) << '\n';
    out << "# event_count=" << trace.gain.event_count << '\n';
    out << "# truncated=" << (trace.gain.truncated ? 1 : 0) << '\n';
    out << "# samples=" << trace.gain.size() << '\n';
    for (const auto& [k, v] : trace.meta) out << "# " << k << '=' << v << '\n';
    out << "index,gain_db,ber\n";
    std::string line;
    for (std::size_t i = 0; i < trace.gain.size(); ++i) {
        line.clear();
        line += std::to_string(i);
        line += ',';
        line += textio::fmt_double(trace.gain.gain_db[i]);
        line += ',';
        line += textio::fmt_double(trace.ber.ber[i]);
        line += '\n';
        out << line;
    }
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

TraceArtifact read_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    TraceArtifact t;
    std::string line;
    if (!std::getline(in, line) || line != "# softfail-trace v1") {
        throw Error(ErrorKind::Io, path + ": not a softfail trace file");
    }
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos || line.size() < 2) {
                throw Error(ErrorKind::Io, path + ": malformed header line: " + line);
            }
            const std::string key = line.substr(2, eq - 2);
            const std::string value = line.substr(eq + 1);
            if (key == "rng_seed") {
                t.gain.rng_seed = textio::parse_int<std::uint64_t>(value);
            } else if (key == "sample_interval") {
                t.gain.sample_interval = textio::parse_double(value);
            } else if (key == "initial_gain_db") {
                t.gain.initial_gain_db = textio::parse_double(value);
            } else if (key == "event_count") {
                t.gain.event_count = textio::parse_int<std::size_t>(value);
            } else if (key == "truncated") {
                t.gain.truncated = value == "1";
            } else if (key == "samples") {
                expected = textio::parse_int<std::size_t>(value);
            } else {
                t.meta.emplace_back(key, value);
            }
            continue;
        }
        if (line == "index,gain_db,ber") break;
        throw Error(ErrorKind::Io, path + ": missing column header");
    }
    t.gain.gain_db.reserve(expected);
    t.ber.ber.reserve(expected);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw Error(ErrorKind::Io, path + ": malformed row: " + line);
        }
        const std::string_view sv(line);
        const auto index = textio::parse_int<std::size_t>(sv.substr(0, c1));
        if (index != t.gain.gain_db.size()) {
            throw Error(ErrorKind::Io, path + ": row index out of sequence");
        }
        t.gain.gain_db.push_back(textio::parse_double(sv.substr(c1 + 1, c2 - c1 - 1)));
        t.ber.ber.push_back(textio::parse_double(sv.substr(c2 + 1)));
    }
    if (t.gain.size() != expected) {
        throw Error(ErrorKind::Io, path + ": expected " + std::to_string(expected) +
                                       " rows, found " + std::to_string(t.gain.size()));
    }
    t.ber.sample_interval = t.gain.sample_interval;
    t.ber.rng_seed = t.gain.rng_seed;
    return t;
}

}  // namespace softfail
