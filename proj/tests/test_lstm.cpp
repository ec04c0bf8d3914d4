#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "softfail/error.hpp"
#include "softfail/forecaster.hpp"
#include "softfail/lstm.hpp"

using namespace softfail;

namespace {

// Reads one cell out of the flat parameter vector using the documented
// layout: U_i..U_g (d x u), then W_i..W_g (u x u).
oracle::ScalarCell cell_from(std::span<const double> p, std::size_t offset, std::size_t u) {
    oracle::ScalarCell c;
    c.u = u;
    c.U.assign(4, std::vector<double>(u));
    c.W.assign(4, std::vector<std::vector<double>>(u, std::vector<double>(u)));
    std::size_t at = offset;
    for (int g = 0; g < 4; ++g)
        for (std::size_t j = 0; j < u; ++j) c.U[g][j] = p[at++];
    for (int g = 0; g < 4; ++g)
        for (std::size_t r = 0; r < u; ++r)
            for (std::size_t j = 0; j < u; ++j) c.W[g][r][j] = p[at++];
    return c;
}

struct DenseOracle {
    std::size_t u, m;
    std::vector<double> W1, b1, W2;
    double b2;

    double operator()(const std::vector<double>& h) const {
        double y = b2;
        for (std::size_t j = 0; j < m; ++j) {
            double a = b1[j];
            for (std::size_t r = 0; r < u; ++r) a += h[r] * W1[r * m + j];
            y += std::tanh(a) * W2[j];
        }
        return y;
    }
};

DenseOracle dense_from(std::span<const double> p, std::size_t offset, std::size_t u,
                       std::size_t m) {
    DenseOracle d{u, m, {}, {}, {}, 0.0};
    auto take = [&](std::size_t n) {
        std::vector<double> v(p.begin() + offset, p.begin() + offset + n);
        offset += n;
        return v;
    };
    d.W1 = take(u * m);
    d.b1 = take(m);
    d.W2 = take(m);
    d.b2 = take(1)[0];
    return d;
}

EdLstmModel randomized(const ModelShape& shape, std::uint64_t seed) {
    auto m = EdLstmModel::initialized(shape, seed);
    std::mt19937_64 gen(seed + 1);
    std::uniform_real_distribution<double> dist(-0.8, 0.8);
    for (auto& x : m.params()) x = dist(gen);
    return m;
}

}  // namespace

TEST_CASE("single step by hand") {
    auto p = LstmCellParams::zeros(1, 1);
    for (auto& v : p.U) v[0] = 1.0;
    for (auto& v : p.W) v[0] = 1.0;
    const std::vector<double> x{1.0};
    const auto s = lstm_step(p.view(), x, CellState::zeros(1));
    // sigma(1) = 0.73106, tanh(1) = 0.76159.
    CHECK(s.c[0] == doctest::Approx(0.55677).epsilon(1e-4));
    CHECK(s.h[0] == doctest::Approx(0.36965).epsilon(1e-4));
    const double sig = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(s.c[0] == doctest::Approx(sig * std::tanh(1.0)).epsilon(1e-15));
    CHECK(s.h[0] == doctest::Approx(std::tanh(sig * std::tanh(1.0)) * sig).epsilon(1e-15));
}

TEST_CASE("zero weights keep zero state") {
    const auto p = LstmCellParams::zeros(1, 5);
    const std::vector<double> xs{0.3, -2.0, 7.0, 1.0};
    const auto s = encode(p.view(), xs);
    for (double v : s.h) CHECK(v == 0.0);
    for (double v : s.c) CHECK(v == 0.0);
}

TEST_CASE("forget gate saturation carries memory") {
    auto p = LstmCellParams::zeros(1, 1);
    p.U[kForget][0] = 40.0;
    p.U[kInput][0] = -40.0;
    const std::vector<double> x{1.0};
    CellState prev{{0.1}, {0.7}};
    const auto s = lstm_step(p.view(), x, prev);
    CHECK(s.c[0] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("shape mismatch") {
    const auto p = LstmCellParams::zeros(1, 3);
    const std::vector<double> x{1.0, 2.0};
    CHECK_THROWS_AS(lstm_step(p.view(), x, CellState::zeros(3)), Error);
    CHECK_THROWS_AS(lstm_step(p.view(), std::vector<double>{1.0}, CellState::zeros(2)), Error);
    CHECK_THROWS_AS(encode(p.view(), std::vector<double>{}), Error);
}

TEST_CASE("gate ranges stay open") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> w(-3.0, 3.0), xin(-5.0, 5.0);
    auto p = LstmCellParams::zeros(1, 6);
    for (auto& m : p.U) for (auto& v : m) v = w(gen);
    for (auto& m : p.W) for (auto& v : m) v = w(gen);
    CellState s = CellState::zeros(6);
    for (int t = 0; t < 300; ++t) {
        StepTrace tr;
        const std::vector<double> x{xin(gen)};
        s = lstm_step(p.view(), x, s, &tr);
        for (std::size_t j = 0; j < 6; ++j) {
            for (auto g : {kInput, kForget, kOutput}) {
                CHECK(tr.gate[g][j] >= 0.0);
                CHECK(tr.gate[g][j] <= 1.0);
            }
            CHECK(std::abs(tr.gate[kCandidate][j]) <= 1.0);
            CHECK(std::abs(s.h[j]) < 1.0);
        }
    }
}

TEST_CASE("encoder fold matches a scalar re-implementation") {
    ModelShape shape;
    shape.hidden_units = 7;
    const auto model = randomized(shape, 3);
    const auto oc = cell_from(model.params(), 0, 7);

    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> xs(51);
    for (auto& x : xs) x = dist(gen);

    const auto got = encode(model.encoder(), xs);
    std::vector<double> h(7), c(7);
    for (double x : xs) std::tie(h, c) = oc.step(x, h, c);
    for (std::size_t j = 0; j < 7; ++j) {
        CHECK(std::abs(got.h[j] - h[j]) <= 1e-12);
        CHECK(std::abs(got.c[j] - c[j]) <= 1e-12);
    }

    // A single input equals one step from zero.
    const std::vector<double> one{0.25};
    const auto a = encode(model.encoder(), one);
    const auto b = lstm_step(model.encoder(), one, CellState::zeros(7));
    CHECK(a.h == b.h);
    CHECK(a.c == b.c);
}

TEST_CASE("decoder unrolled by hand") {
    ModelShape shape;
    shape.hidden_units = 4;
    shape.dense_units = 3;
    shape.past_len = 5;
    shape.horizon = 3;
    const auto model = randomized(shape, 17);
    const std::size_t cell = shape.cell_size();
    const auto enc = cell_from(model.params(), 0, 4);
    const auto dec = cell_from(model.params(), cell, 4);
    const auto head = dense_from(model.params(), 2 * cell, 4, 3);

    const std::vector<double> xs{0.1, 0.4, -0.2, 0.3, 0.0, 0.9};
    std::vector<double> h(4), c(4);
    for (double x : xs) std::tie(h, c) = enc.step(x, h, c);

    auto [h1, c1] = dec.step(0.0, h, c);
    const double y1 = head(h1);
    auto [h2, c2] = dec.step(y1, h1, c1);
    const double y2 = head(h2);
    auto [h3, c3] = dec.step(y2, h2, c2);
    const double y3 = head(h3);

    const auto got = forecast(model, xs, 3);
    REQUIRE(got.size() == 3);
    CHECK(std::abs(got[0] - y1) <= 1e-12);
    CHECK(std::abs(got[1] - y2) <= 1e-12);
    CHECK(std::abs(got[2] - y3) <= 1e-12);

    // s = 1 is one decoder step and one dense application.
    const auto state = encode(model.encoder(), xs);
    const auto one = decode(model, state, 1);
    REQUIRE(one.size() == 1);
    CHECK(std::abs(one[0] - y1) <= 1e-12);
    CHECK_THROWS_AS(decode(model, state, 0), Error);
}

TEST_CASE("zero model predicts zeros") {
    ModelShape shape;
    shape.hidden_units = 4;
    shape.past_len = 3;
    shape.horizon = 5;
    const EdLstmModel zero(shape);
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    for (double y : forecast(zero, xs, 5)) CHECK(y == 0.0);
}

TEST_CASE("mse loss") {
    const std::vector<double> a{0.5, -1.0, 2.0};
    CHECK(mse_loss(a, a) == 0.0);
    CHECK(mse_loss(std::vector<double>{1, 1}, std::vector<double>{0, 0}) == 1.0);
    const std::vector<double> b{0.0, 1.0, 1.5};
    CHECK(mse_loss(a, b) == doctest::Approx((0.25 + 4.0 + 0.25) / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(mse_loss(a, std::vector<double>{1.0}), Error);
}

TEST_CASE("parameter layout") {
    ModelShape shape;
    const auto blocks = EdLstmModel(shape).blocks();
    std::size_t total = 0;
    for (const auto& b : blocks) {
        CHECK(b.offset == total);
        total += b.size;
    }
    CHECK(total == shape.param_count());
    // 2 cells of 4 (1x30 + 30x30), dense 30x20 + 20 + 20 + 1.
    CHECK(shape.param_count() == 2 * 4 * (30 + 900) + 600 + 20 + 20 + 1);
    shape.use_bias = true;
    CHECK(shape.param_count() == 2 * 4 * (30 + 900 + 30) + 600 + 20 + 20 + 1);
}

TEST_CASE("initialization bounds and determinism") {
    ModelShape shape;
    const auto a = EdLstmModel::initialized(shape, 5);
    const auto b = EdLstmModel::initialized(shape, 5);
    const auto c = EdLstmModel::initialized(shape, 6);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
    const double bound = 1.0 / std::sqrt(30.0);
    for (const auto& blk : a.blocks()) {
        if (blk.name.rfind("dense.W2", 0) == 0 || blk.name.find(".b") != std::string::npos) continue;
        for (std::size_t i = blk.offset; i < blk.offset + blk.size; ++i)
            CHECK(std::abs(a.params()[i]) <= bound);
    }
}
