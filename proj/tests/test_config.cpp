#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>

#include "softfail/config.hpp"
#include "softfail/error.hpp"

using namespace softfail;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("paper preset keeps the reference constants") {
    const auto c = preset_config("paper");
    CHECK(c.aging.horizon_samples == 1'000'000);
    CHECK(c.aging.scale_lambda == 595.75);
    CHECK(c.window.tau_minutes == 90.0);
    CHECK(c.window.past_len == 50);
    CHECK(c.window.future_len == 70);
    CHECK(c.model.hidden_units == 30);
    CHECK(c.model.dense_units == 20);
    CHECK(c.model.past_len == 50);
    CHECK(c.model.horizon == 70);
    CHECK(c.train.learning_rate == 1e-5);
    CHECK(c.train.batch_size == 16);
    CHECK(c.train.epochs == 500);
    CHECK(c.policy.hard_failure.ber_threshold == 1e-3);
    CHECK(c.policy.fixed_reductions_db == std::vector<double>{5.0, 7.0, 10.0});
}

TEST_CASE("desk preset is small") {
    const auto c = preset_config("desk");
    CHECK(c.model.hidden_units == 16);
    CHECK(c.window.past_len == 20);
    CHECK(c.window.future_len == 10);
    CHECK(c.model.horizon == 10);
    CHECK(c.train.epochs == 100);
    std::size_t tau = c.aging.horizon_samples / c.window.raw_per_tau();
    if (c.window.max_tau_samples > 0) tau = std::min(tau, c.window.max_tau_samples);
    const std::size_t n = window_count(tau, c.window.width(), c.window.stride);
    CHECK(n == 600);
    CHECK(kind_of([] { preset_config("huge"); }) == ErrorKind::Config);
}

TEST_CASE("JSON overrides") {
    const auto c = apply_config_json(preset_config("paper"),
                                     R"({"seed": 9, "window": {"stride": 1, "future_len": 12},
                                         "train": {"epochs": 3}, "dataset": {"transform": "log10"}})");
    CHECK(c.seed == 9);
    CHECK(c.window.stride == 1);
    CHECK(c.model.horizon == 12);
    CHECK(c.train.epochs == 3);
    CHECK(c.dataset.transform == TargetTransform::Log10);
    CHECK(c.window.past_len == 50);

    const auto d = apply_config_json(preset_config("paper"), R"({"preset": "desk"})");
    CHECK(d.model.hidden_units == 16);

    const auto n = apply_config_json(preset_config("paper"), R"({"calibration": {"hard_failure_drop_db": null}})");
    CHECK_FALSE(n.calibration.target.hard_failure_drop_db.has_value());
}

TEST_CASE("bad documents are configuration errors") {
    const auto base = preset_config("paper");
    CHECK(kind_of([&] { apply_config_json(base, R"({"sede": 1})"); }) == ErrorKind::Config);
    CHECK(kind_of([&] { apply_config_json(base, R"({"window": {"strde": 1}})"); }) == ErrorKind::Config);
    CHECK(kind_of([&] { apply_config_json(base, R"({"seed": "x"})"); }) == ErrorKind::Config);
    CHECK(kind_of([&] { apply_config_json(base, "{not json"); }) == ErrorKind::Config);
    CHECK(kind_of([&] { apply_config_json(base, R"({"train": {"batch_size": 0}})"); }) == ErrorKind::Config);
    CHECK(kind_of([&] { apply_config_json(base, R"({"dataset": {"normalizer": "max"}})"); }) ==
          ErrorKind::Config);
    CHECK(kind_of([&] { load_config_file(base, "/nonexistent/config.json"); }) == ErrorKind::Io);
}

TEST_CASE("resolved config round trips") {
    auto c = preset_config("desk");
    c.seed = 77;
    c.physics.snr_penalty_db = 5.5548;
    c.aging.units_per_event = 1234.5;
    const auto text = config_to_json(c);
    const auto back = apply_config_json(preset_config("paper"), text);
    CHECK(config_to_json(back) == text);
    CHECK(back.seed == 77);
    CHECK(back.aging.units_per_event == 1234.5);
}
