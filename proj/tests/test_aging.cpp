#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "softfail/aging.hpp"
#include "softfail/error.hpp"

using namespace softfail;

namespace {

CalibrationTarget default_target() {
    CalibrationTarget t;
    t.hard_failure_drop_db = 9.5;
    return t;
}

// One calibrated default trace, shared by the slower cases.
struct Calibrated {
    Calibration cal;
    GainTrace gain;
    BerTrace ber;

    Calibrated() {
        const auto geom = LightpathGeometry::reference();
        cal = calibrate_trace(WeibullProcessParams{}, PhysicalParams{}, geom, default_target(), 1);
        gain = gain_trace(cal.process, sample_event_times(cal.process, 1), 1);
        ber = ber_trace(gain, cal.physics, geom);
    }
};

const Calibrated& calibrated() {
    static const Calibrated c;
    return c;
}

}  // namespace

TEST_CASE("unit shape gives exponential inter-arrivals") {
    WeibullProcessParams p;
    p.shape_beta = 1.0;
    p.horizon_samples = 20'000'000;
    const auto t = sample_event_times(p, 11);
    REQUIRE(t.size() > 10000);
    double sum = 0.0, sumsq = 0.0;
    double prev = 0.0;
    for (double x : t) {
        const double gap = x - prev;
        sum += gap;
        sumsq += gap * gap;
        prev = x;
    }
    const double n = static_cast<double>(t.size());
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(p.scale_lambda).epsilon(0.03));
    // Exponential: standard deviation equals the mean.
    CHECK(std::sqrt(var) == doctest::Approx(p.scale_lambda).epsilon(0.05));
}

TEST_CASE("mean event count matches (T/lambda)^beta") {
    WeibullProcessParams p;
    p.sample_interval = p.scale_lambda;
    p.horizon_samples = 10;  // T = 10 lambda
    const double expected = std::pow(10.0, 1.05);
    CHECK(expected == doctest::Approx(11.22).epsilon(1e-3));
    double total = 0.0;
    const int runs = 10000;
    for (int s = 0; s < runs; ++s) total += static_cast<double>(sample_event_times(p, 1000 + s).size());
    CHECK(total / runs == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("zero horizon has no events") {
    WeibullProcessParams p;
    p.horizon_samples = 0;
    CHECK(sample_event_times(p, 5).empty());
}

TEST_CASE("invalid process parameters") {
    WeibullProcessParams p;
    p.shape_beta = 0.0;
    CHECK_THROWS_AS(sample_event_times(p, 1), Error);
    p = {};
    p.initial_gain_db = -1.0;
    CHECK_THROWS_AS(sample_event_times(p, 1), Error);
}

TEST_CASE("gain trace arithmetic") {
    WeibullProcessParams p;
    p.horizon_samples = 100;
    const auto flat = gain_trace(p, {}, 1);
    REQUIRE(flat.size() == 100);
    for (double g : flat.gain_db) CHECK(g == 22.0);

    p.degradation_step_db = 0.5;
    const auto t = gain_trace(p, {10.0, 20.0, 30.0}, 1);
    CHECK(t.gain_db.front() == 22.0);
    CHECK(t.gain_db[15] == 21.5);
    CHECK(t.gain_db.back() == 20.5);
    CHECK(t.event_count == 3);
    CHECK_FALSE(t.truncated);

    CHECK_THROWS_AS(gain_trace(p, {3.0, 1.0}, 1), Error);
}

TEST_CASE("gain trace truncates at 0 dB") {
    WeibullProcessParams p;
    p.horizon_samples = 100;
    p.degradation_step_db = 1.0;
    p.units_per_event = 11.0;
    const auto t = gain_trace(p, {10.0, 20.0, 30.0}, 1);
    CHECK(t.truncated);
    CHECK(t.size() == 20);
    CHECK(t.gain_db.back() == 11.0);

    const auto ber = ber_trace(t, PhysicalParams{}, LightpathGeometry::reference());
    CHECK(ber.size() == t.size());
}

TEST_CASE("constant gain gives constant nominal BER") {
    WeibullProcessParams p;
    p.horizon_samples = 50;
    const auto gain = gain_trace(p, {}, 1);
    const PhysicalParams phys;
    const auto geom = LightpathGeometry::reference();
    const auto ber = ber_trace(gain, phys, geom);
    const double nominal = ber_of_state(phys, geom, nominal_state(phys, geom, 22.0));
    for (double b : ber.ber) CHECK(b == nominal);
}

TEST_CASE("parallel BER kernel is bit-identical to the serial one") {
    WeibullProcessParams p;
    p.horizon_samples = 200'000;
    p.units_per_event = 30000.0;
    const auto gain = gain_trace(p, sample_event_times(p, 4), 4);
    PhysicalParams phys;
    phys.snr_penalty_db = 5.5;
    const auto geom = LightpathGeometry::reference();
    const auto a = ber_trace(gain, phys, geom);
    const auto b = ber_trace_serial(gain, phys, geom);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.ber.data(), b.ber.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("seeded traces are bit-identical") {
    WeibullProcessParams p;
    p.horizon_samples = 100'000;
    const auto a = sample_event_times(p, 99);
    const auto b = sample_event_times(p, 99);
    const auto c = sample_event_times(p, 100);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("calibrated default trace") {
    const auto& c = calibrated();
    REQUIRE(c.gain.size() == 1'000'000);
    CHECK(c.cal.target_index == 950'000);
    CHECK(c.cal.crossing_index >= 930'000);
    CHECK(c.cal.crossing_index <= 970'000);
    // Rescan independently of the calibration's own bookkeeping.
    std::size_t first = 0;
    while (first < c.ber.size() && !(c.ber.ber[first] > 1e-3)) ++first;
    CHECK(first == c.cal.crossing_index);

    const double drop = c.gain.initial_gain_db - c.gain.gain_db.back();
    CHECK(drop >= 9.0);
    CHECK(drop <= 15.0);
}

TEST_CASE("calibrated trace is monotone and within (0, 0.5]") {
    const auto& c = calibrated();
    CHECK(c.gain.gain_db.front() == c.gain.initial_gain_db);
    std::size_t gain_up = 0, ber_down = 0, out_of_range = 0;
    for (std::size_t i = 1; i < c.gain.size(); ++i) {
        if (c.gain.gain_db[i] > c.gain.gain_db[i - 1]) ++gain_up;
        if (c.ber.ber[i] < c.ber.ber[i - 1]) ++ber_down;
    }
    for (double b : c.ber.ber)
        if (!(b > 0.0 && b <= 0.5)) ++out_of_range;
    CHECK(gain_up == 0);
    CHECK(ber_down == 0);
    CHECK(out_of_range == 0);
}

TEST_CASE("degradation is slower at the beginning") {
    const auto& c = calibrated();
    const std::size_t n = c.ber.size();
    const std::size_t d = n / 10;
    const double first = (c.ber.ber[d - 1] - c.ber.ber[0]) / static_cast<double>(d - 1);
    const double last = (c.ber.ber[n - 1] - c.ber.ber[n - d]) / static_cast<double>(d - 1);
    CHECK(last > first);
}

TEST_CASE("calibration with crossing fraction 1") {
    auto t = default_target();
    t.crossing_fraction = 1.0;
    const auto cal = calibrate_trace(WeibullProcessParams{}, PhysicalParams{},
                                     LightpathGeometry::reference(), t, 1);
    CHECK(cal.crossing_index >= 980'000);
    CHECK(cal.crossing_index < 1'000'000);
}

TEST_CASE("calibration errors") {
    const auto geom = LightpathGeometry::reference();
    const PhysicalParams phys;
    const double nominal = ber_of_state(phys, geom, nominal_state(phys, geom, 22.0));

    CalibrationTarget t;
    t.hard_ber = nominal;
    try {
        calibrate_trace(WeibullProcessParams{}, phys, geom, t, 1);
        FAIL("expected a calibration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Calibration);
    }

    t = {};
    t.crossing_fraction = 0.4;
    CHECK_THROWS_AS(calibrate_trace(WeibullProcessParams{}, phys, geom, t, 1), Error);
    t = {};
    t.hard_ber = 0.6;
    CHECK_THROWS_AS(calibrate_trace(WeibullProcessParams{}, phys, geom, t, 1), Error);
}

TEST_CASE("trace file round trip is exact") {
    WeibullProcessParams p;
    p.horizon_samples = 5000;
    p.units_per_event = 1000.0;
    TraceArtifact a;
    a.gain = gain_trace(p, sample_event_times(p, 8), 8);
    a.ber = ber_trace(a.gain, PhysicalParams{}, LightpathGeometry::reference());
    a.meta = {{"seed", "8"}, {"units_per_event", "1000"}};

    const auto path = std::filesystem::temp_directory_path() / "softfail_trace_rt.csv";
    write_trace(path.string(), a);
    const auto b = read_trace(path.string());
    std::filesystem::remove(path);

    CHECK(b.gain.gain_db == a.gain.gain_db);
    CHECK(b.ber.ber == a.ber.ber);
    CHECK(b.gain.rng_seed == 8);
    CHECK(b.find_meta("units_per_event").value_or("") == "1000");
    CHECK_FALSE(b.find_meta("missing").has_value());

    CHECK_THROWS_AS(read_trace("/nonexistent/trace.csv"), Error);
}
