#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's numerical code paths.

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

using Real50 = boost::multiprecision::cpp_bin_float_50;

inline Real50 erfc50(const Real50& x) { return boost::math::erfc(x); }

inline Real50 ber_4qam50(const Real50& snr) {
    using boost::multiprecision::sqrt;
    return erfc50(sqrt(snr / 2)) / 2;
}

/// SNR giving the target BER, by bisection on the 50-digit BER.
inline double snr_at_ber(double target) {
    Real50 lo = 0, hi = 100;
    for (int i = 0; i < 200; ++i) {
        Real50 mid = (lo + hi) / 2;
        if (ber_4qam50(mid) > Real50(target)) lo = mid; else hi = mid;
    }
    return static_cast<double>((lo + hi) / 2);
}

/// All window start offsets of the given width over length samples.
inline std::vector<std::size_t> window_starts(std::size_t length, std::size_t width,
                                              std::size_t stride) {
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + width <= length; s += stride) starts.push_back(s);
    return starts;
}

/// Plain scalar LSTM cell for d = 1, weights held as [gate][j] and
/// [gate][r][j]; gate order i, f, o, g.
struct ScalarCell {
    std::size_t u = 0;
    std::vector<std::vector<double>> U;               // 4 x u
    std::vector<std::vector<std::vector<double>>> W;  // 4 x u x u

    std::pair<std::vector<double>, std::vector<double>> step(
        double x, const std::vector<double>& h, const std::vector<double>& c) const {
        std::vector<double> hn(u), cn(u);
        for (std::size_t j = 0; j < u; ++j) {
            double a[4];
            for (int g = 0; g < 4; ++g) {
                a[g] = x * U[g][j];
                for (std::size_t r = 0; r < u; ++r) a[g] += h[r] * W[g][r][j];
            }
            const double i = 1.0 / (1.0 + std::exp(-a[0]));
            const double f = 1.0 / (1.0 + std::exp(-a[1]));
            const double o = 1.0 / (1.0 + std::exp(-a[2]));
            const double g = std::tanh(a[3]);
            cn[j] = f * c[j] + i * g;
            hn[j] = std::tanh(cn[j]) * o;
        }
        return {hn, cn};
    }
};

}  // namespace oracle
