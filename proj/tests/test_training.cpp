#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <filesystem>
#include <limits>

#include "softfail/forecaster.hpp"

using namespace softfail;

namespace {

SequenceDataset small_dataset(std::size_t k = 6, std::size_t s = 4) {
    BerTrace t;
    t.rng_seed = 1;
    for (int i = 0; i < 90 * 160; ++i) {
        const double x = static_cast<double>(i) / (90.0 * 160.0);
        t.ber.push_back(1e-9 * std::pow(10.0, 5.0 * x * x) * (1.0 + 0.05 * std::sin(i * 0.002)));
    }
    WindowSpec w;
    w.past_len = k;
    w.future_len = s;
    return build_dataset(t, w, DatasetOptions{}, trace_hash(t));
}

ModelShape small_shape(const SequenceDataset& ds) {
    ModelShape m;
    m.hidden_units = 5;
    m.dense_units = 4;
    m.past_len = ds.window.past_len;
    m.horizon = ds.window.future_len;
    return m;
}

TrainConfig quick(std::size_t epochs, double lr = 1e-2) {
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = lr;
    c.batch_size = 8;
    c.seed = 3;
    return c;
}

std::filesystem::path temp(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.0, 0.0};
    auto st = AdamState::zeros(2);
    adam_update(p, g, st, TrainConfig{});
    CHECK(p == std::vector<double>{1.0, -2.0});
    CHECK(st.step == 1);
}

TEST_CASE("Adam: first two steps by hand") {
    TrainConfig c;
    c.learning_rate = 0.1;
    std::vector<double> p{1.0, 1.0};
    auto st = AdamState::zeros(2);
    const std::vector<double> g1{0.5, -3.0};
    adam_update(p, g1, st, c);
    // Step 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(1.0 + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));

    const std::vector<double> g2{0.2, 1.0};
    const double before0 = p[0];
    adam_update(p, g2, st, c);
    const double m = 0.9 * (0.1 * 0.5) + 0.1 * 0.2;
    const double v = 0.999 * (0.001 * 0.25) + 0.001 * 0.04;
    const double mh = m / (1.0 - 0.81), vh = v / (1.0 - 0.999 * 0.999);
    CHECK(p[0] == doctest::Approx(before0 - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-14));
}

TEST_CASE("zero learning rate keeps everything constant") {
    const auto ds = small_dataset();
    auto model = EdLstmModel::initialized(small_shape(ds), 7);
    auto st = start_training(model);
    train(st, ds, quick(3, 0.0));
    CHECK(std::equal(st.current.params().begin(), st.current.params().end(),
                     model.params().begin()));
    const auto& e = st.history.epochs;
    REQUIRE(e.size() == 3);
    CHECK(e[0].train_mse == e[1].train_mse);
    CHECK(e[1].train_mse == e[2].train_mse);
    CHECK(e[0].val_mse == e[2].val_mse);
}

TEST_CASE("one small step lowers the batch loss") {
    const auto ds = small_dataset();
    const auto model = EdLstmModel::initialized(small_shape(ds), 9);
    const auto rows = normalized_rows(ds);
    std::vector<Example> batch;
    const std::size_t w = ds.width(), in = ds.window.input_len();
    for (std::size_t i = 0; i < 8; ++i) {
        std::span<const double> r(rows.data() + i * w, w);
        batch.push_back({r.first(in), r.subspan(in)});
    }
    std::vector<double> grad(model.shape().param_count());
    const double before = batch_gradient(model, batch, grad);
    auto next = model;
    auto st = AdamState::zeros(grad.size());
    adam_update(next.params(), grad, st, quick(1, 1e-4));
    std::vector<double> scratch(grad.size());
    const double after = batch_gradient(next, batch, scratch);
    CHECK(after < before);
}

TEST_CASE("training reduces validation loss and keeps the best epoch") {
    const auto ds = small_dataset();
    const auto r = train(ds, small_shape(ds), quick(30));
    const auto& e = r.history.epochs;
    REQUIRE(e.size() == 30);
    CHECK(r.history.best_val_mse < e.front().val_mse);
    double best = e.front().val_mse;
    for (const auto& rec : e) best = std::min(best, rec.val_mse);
    CHECK(r.history.best_val_mse == best);
    CHECK(e[r.history.best_epoch - 1].val_mse == best);
    // The returned model is the best checkpoint.
    const auto ev = evaluate(r.model, ds, ds.split.fit_end, ds.split.train_end);
    CHECK(ev.mean_normalized == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("seeded training is bit-identical") {
    const auto ds = small_dataset();
    const auto a = train(ds, small_shape(ds), quick(4));
    const auto b = train(ds, small_shape(ds), quick(4));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.history.epochs[i].train_mse == b.history.epochs[i].train_mse);
        CHECK(a.history.epochs[i].val_mse == b.history.epochs[i].val_mse);
    }
    CHECK(std::equal(a.model.params().begin(), a.model.params().end(), b.model.params().begin()));
}

TEST_CASE("resume from a checkpoint continues bit-for-bit") {
    const auto ds = small_dataset();
    auto model = EdLstmModel::initialized(small_shape(ds), 3);
    model.encoding = ds.encoding();

    auto full = start_training(model);
    train(full, ds, quick(6));

    auto half = start_training(model);
    train(half, ds, quick(3));
    const auto path = temp("softfail_ckpt_rt.txt");
    save_checkpoint(path.string(), half, quick(3));
    TrainConfig loaded_cfg;
    auto resumed = load_checkpoint(path.string(), &loaded_cfg);
    std::filesystem::remove(path);
    CHECK(loaded_cfg.learning_rate == quick(3).learning_rate);
    train(resumed, ds, quick(6));

    REQUIRE(resumed.history.epochs.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(resumed.history.epochs[i].train_mse == full.history.epochs[i].train_mse);
        CHECK(resumed.history.epochs[i].val_mse == full.history.epochs[i].val_mse);
    }
    CHECK(std::equal(resumed.current.params().begin(), resumed.current.params().end(),
                     full.current.params().begin()));
    CHECK(std::equal(resumed.best.params().begin(), resumed.best.params().end(),
                     full.best.params().begin()));
    CHECK(resumed.history.best_epoch == full.history.best_epoch);
}

TEST_CASE("model file round trip preserves predictions exactly") {
    const auto ds = small_dataset();
    const auto r = train(ds, small_shape(ds), quick(2));
    const auto path = temp("softfail_model_rt.txt");
    save_model(path.string(), r.model, quick(2));
    const auto back = load_model(path.string());
    std::filesystem::remove(path);

    CHECK(std::equal(back.params().begin(), back.params().end(), r.model.params().begin()));
    const auto obs = std::vector<double>(ds.window.input_len(), 2e-7);
    CHECK(predict(back, obs, 4) == predict(r.model, obs, 4));
    CHECK(predict(r.model, obs, 4) == predict(r.model, obs, 4));
    CHECK_THROWS_AS(load_model("/nonexistent/model.txt"), Error);
}

TEST_CASE("predict composes encode, decode and the encoding") {
    const auto ds = small_dataset();
    auto model = EdLstmModel::initialized(small_shape(ds), 12);
    model.encoding = ds.encoding();
    std::vector<double> obs;
    for (std::size_t i = 0; i < ds.window.input_len(); ++i) obs.push_back(1e-8 * (1.0 + i));
    std::vector<double> x;
    for (double b : obs) x.push_back(ds.encoding().encode(b));
    const auto state = encode(model.encoder(), x);
    const auto y = decode(model, state, 4);
    const auto got = predict(model, obs, 4);
    for (std::size_t j = 0; j < 4; ++j) CHECK(got[j] == ds.encoding().decode(y[j]));

    // Zero network: every output decodes the normalized zero.
    EdLstmModel zero(small_shape(ds));
    zero.encoding = ds.encoding();
    for (double v : predict(zero, obs, 4)) CHECK(v == ds.encoding().decode(0.0));

    CHECK_THROWS_AS(predict(model, std::vector<double>(3, 1e-9), 4), Error);
    // Longer horizons are allowed.
    CHECK(predict(model, obs, 9).size() == 9);
}

TEST_CASE("non-finite data aborts with the history so far") {
    auto ds = small_dataset();
    ds.rows[ds.width() * 2 + 1] = std::numeric_limits<double>::quiet_NaN();
    try {
        train(ds, small_shape(ds), quick(3));
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.kind() == ErrorKind::Divergence);
        CHECK(e.history().epochs.empty());
    }
}

TEST_CASE("evaluation") {
    const auto ds = small_dataset();
    const auto model = EdLstmModel::initialized(small_shape(ds), 1);
    const auto ev = evaluate(model, ds, ds.split.train_end, ds.size());
    REQUIRE(ev.patterns.size() == ds.split.test_size());
    double sum = 0.0;
    for (const auto& p : ev.patterns) sum += p.mse_normalized;
    CHECK(ev.mean_normalized == doctest::Approx(sum / ev.patterns.size()).epsilon(1e-14));
    CHECK(ev.patterns.front().index == ds.split.train_end);
    CHECK_THROWS_AS(evaluate(model, ds, 5, 5), Error);
}

TEST_CASE("history CSV") {
    TrainHistory h;
    h.epochs.push_back({1, 0.5, 0.25, 1.0});
    h.epochs.push_back({2, 0.125, 0.0625, 1.0});
    const auto path = temp("softfail_hist.csv");
    write_history_csv(path.string(), h);
    std::ifstream in(path);
    std::string header, l1;
    std::getline(in, header);
    std::getline(in, l1);
    in.close();
    std::filesystem::remove(path);
    CHECK(header == "epoch,train_mse,val_mse");
    CHECK(l1 == "1,0.5,0.25");
}
