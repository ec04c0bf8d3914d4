// Times the OpenMP kernels against their serial references and checks that
// both produce the same bits.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include <omp.h>

#include "softfail/aging.hpp"
#include "softfail/forecaster.hpp"
#include "softfail/rng.hpp"

using namespace softfail;

namespace {

template <typename F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (s < best) best = s;
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-16s serial %9.4f s  openmp %9.4f s  speedup %5.2fx  %s\n", name, serial,
                parallel, serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());

    WeibullProcessParams proc;
    proc.units_per_event = 9.5 / (1e-6 * 1600);
    const auto events = sample_event_times(proc, 1);
    const auto gain = gain_trace(proc, events, 1);
    const PhysicalParams phys;
    const auto geom = LightpathGeometry::reference();

    BerTrace a, b;
    const double ts = best_of(3, [&] { a = ber_trace_serial(gain, phys, geom); });
    const double tp = best_of(3, [&] { b = ber_trace(gain, phys, geom); });
    report("ber_trace", ts, tp,
           a.ber.size() == b.ber.size() &&
               std::memcmp(a.ber.data(), b.ber.data(), a.ber.size() * sizeof(double)) == 0);

    ModelShape shape;
    const auto model = EdLstmModel::initialized(shape, 7);
    Rng rng(3);
    std::vector<double> data(64 * (shape.past_len + 1 + shape.horizon));
    for (auto& x : data) x = rng.uniform();
    std::vector<Example> batch;
    const std::size_t w = shape.past_len + 1 + shape.horizon;
    for (std::size_t i = 0; i < 64; ++i) {
        std::span<const double> row(data.data() + i * w, w);
        batch.push_back({row.first(shape.past_len + 1), row.subspan(shape.past_len + 1)});
    }
    std::vector<double> ga(shape.param_count()), gb(shape.param_count());
    const double gs = best_of(3, [&] { batch_gradient_serial(model, batch, ga); });
    const double gp = best_of(3, [&] { batch_gradient(model, batch, gb); });
    report("batch_gradient", gs, gp,
           std::memcmp(ga.data(), gb.data(), ga.size() * sizeof(double)) == 0);
    return 0;
}
