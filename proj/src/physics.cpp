#include "softfail/physics.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "softfail/error.hpp"

namespace softfail {

namespace {

void require(bool ok, ErrorKind kind, const std::string& msg) {
    if (!ok) throw Error(kind, msg);
}

}  // namespace

void PhysicalParams::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    require(std::isfinite(transmit_power_dbm), ErrorKind::InvalidArgument,
            "transmit_power_dbm must be finite");
    require(positive(carrier_frequency_hz), ErrorKind::InvalidArgument,
            "carrier_frequency_hz must be > 0");
    require(nsp_inline >= 1.0 && nsp_booster >= 1.0, ErrorKind::InvalidArgument,
            "spontaneous emission factors must be >= 1");
    require(positive(fiber_attenuation_db_per_km), ErrorKind::InvalidArgument,
            "fiber_attenuation_db_per_km must be > 0");
    require(positive(wss_loss_db) && positive(tap_loss_db), ErrorKind::InvalidArgument,
            "wss_loss_db and tap_loss_db must be > 0");
    require(positive(edfa_spacing_km), ErrorKind::InvalidArgument,
            "edfa_spacing_km must be > 0");
    require(positive(booster_gain_db), ErrorKind::InvalidArgument,
            "booster_gain_db must be > 0");
    require(positive(electrical_bandwidth_hz) && positive(planck_j_s),
            ErrorKind::InvalidArgument, "bandwidth and Planck constant must be > 0");
    require(std::isfinite(snr_penalty_db), ErrorKind::InvalidArgument,
            "snr_penalty_db must be finite");
}

double PhysicalParams::gamma() const {
    return 2.0 * planck_j_s * carrier_frequency_hz * electrical_bandwidth_hz;
}

LightpathGeometry LightpathGeometry::from_links(const std::vector<double>& link_lengths_km,
                                                double edfa_spacing_km,
                                                std::vector<int> node_degree_q,
                                                int degraded_edfa_index) {
    require(!link_lengths_km.empty(), ErrorKind::InvalidGeometry, "route has no links");
    require(edfa_spacing_km > 0.0, ErrorKind::InvalidGeometry, "edfa spacing must be > 0");
    const double total = std::accumulate(link_lengths_km.begin(), link_lengths_km.end(), 0.0);
    const double amps = total / edfa_spacing_km;
    const double rounded = std::round(amps);
    require(std::abs(amps - rounded) < 1e-9 && rounded >= 1.0, ErrorKind::InvalidGeometry,
            "total fiber length must be a positive multiple of the EDFA spacing");

    LightpathGeometry g;
    g.span_lengths_km = link_lengths_km;
    g.hops = static_cast<int>(link_lengths_km.size());
    g.inline_edfa_count = static_cast<int>(rounded);
    g.node_degree_q = std::move(node_degree_q);
    g.degraded_edfa_index = degraded_edfa_index;
    PhysicalParams p;
    p.edfa_spacing_km = edfa_spacing_km;
    g.validate(p);
    return g;
}

LightpathGeometry LightpathGeometry::reference(const PhysicalParams& params) {
    return from_links({400.0, 300.0}, params.edfa_spacing_km, {4}, 1);
}

void LightpathGeometry::validate(const PhysicalParams& params) const {
    require(hops >= 1 && static_cast<std::size_t>(hops) == span_lengths_km.size(),
            ErrorKind::InvalidGeometry, "hops must equal the number of links");
    for (double len : span_lengths_km) {
        require(std::isfinite(len) && len > 0.0, ErrorKind::InvalidGeometry,
                "link lengths must be > 0");
    }
    const double total = std::accumulate(span_lengths_km.begin(), span_lengths_km.end(), 0.0);
    const double amps = total / params.edfa_spacing_km;
    require(std::abs(amps - inline_edfa_count) < 1e-9, ErrorKind::InvalidGeometry,
            "inline_edfa_count must equal total length / edfa spacing");
    require(degraded_edfa_index >= 1 && degraded_edfa_index <= inline_edfa_count,
            ErrorKind::InvalidGeometry, "degraded_edfa_index out of range");
    require(node_degree_q.size() == static_cast<std::size_t>(hops - 1),
            ErrorKind::InvalidGeometry, "node_degree_q needs one entry per intermediate node");
    for (int q : node_degree_q) {
        require(q >= 1, ErrorKind::InvalidGeometry, "node port count must be >= 1");
    }
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }
double dbm_to_watts(double dbm) { return db_to_linear(dbm) * 1e-3; }
double watts_to_dbm(double watts) { return linear_to_db(watts * 1e3); }

double booster_gain_db(int q_ports, double wss_loss_db) {
    require(q_ports >= 1, ErrorKind::InvalidGeometry, "q_ports must be >= 1");
    require(wss_loss_db >= 0.0, ErrorKind::InvalidArgument, "wss_loss_db must be >= 0");
    // ceil(log2 q) computed on integers to avoid rounding at powers of two.
    int bits = 0;
    while ((1 << bits) < q_ports) ++bits;
    return 3.0 * bits + wss_loss_db;
}

double inline_gain_nominal_db(const PhysicalParams& params, double span_km) {
    require(span_km > 0.0, ErrorKind::InvalidArgument, "span_km must be > 0");
    return params.fiber_attenuation_db_per_km * span_km + params.tap_loss_db;
}

std::vector<double> booster_gains_db(const PhysicalParams& params,
                                     const LightpathGeometry& geom) {
    std::vector<double> out;
    out.reserve(geom.node_degree_q.size());
    for (int q : geom.node_degree_q) {
        out.push_back(params.booster_gain_from_rule ? booster_gain_db(q, params.wss_loss_db)
                                                    : params.booster_gain_db);
    }
    return out;
}

LinkState nominal_state(const PhysicalParams& params, const LightpathGeometry& geom,
                        double inline_gain_db) {
    return LinkState{inline_gain_db, inline_gain_db, booster_gains_db(params, geom)};
}

namespace {

void check_state(const LightpathGeometry& geom, const LinkState& state) {
    require(state.booster_gains_db.size() == static_cast<std::size_t>(geom.hops - 1),
            ErrorKind::InvalidGeometry, "booster gain list must have hops - 1 entries");
    // 0 dB (unity gain) is allowed; it adds no ASE.
    require(state.inline_gain_degraded_db >= 0.0 &&
                state.inline_gain_degraded_db <= state.inline_gain_nominal_db,
            ErrorKind::InvalidArgument, "degraded gain must lie in [0, nominal]");
}

}  // namespace

double received_power_dbm(const PhysicalParams& params, const LightpathGeometry& geom,
                          const LinkState& state) {
    check_state(geom, state);
    const double m = geom.inline_edfa_count;
    const double fiber_loss = m * params.fiber_attenuation_db_per_km * params.edfa_spacing_km;
    double p = params.transmit_power_dbm - fiber_loss - params.wss_loss_db - params.tap_loss_db;
    p += state.inline_gain_degraded_db + (m - 1.0) * state.inline_gain_nominal_db;
    for (double g : state.booster_gains_db) p += g;
    return p;
}

double ase_noise_w(const PhysicalParams& params, const LightpathGeometry& geom,
                   const LinkState& state) {
    check_state(geom, state);
    const double m = geom.inline_edfa_count;
    const double inline_term = (m - 1.0) * (db_to_linear(state.inline_gain_nominal_db) - 1.0) +
                               (db_to_linear(state.inline_gain_degraded_db) - 1.0);
    double booster_term = 0.0;
    for (double g : state.booster_gains_db) booster_term += db_to_linear(g) - 1.0;
    return params.gamma() * (params.nsp_inline * inline_term + params.nsp_booster * booster_term);
}

double snr_linear(double signal_dbm, double noise_w) {
    require(noise_w > 0.0, ErrorKind::NumericDomain, "noise power must be > 0");
    return dbm_to_watts(signal_dbm) / noise_w;
}

double ber_4qam(double snr) {
    require(snr >= 0.0, ErrorKind::NumericDomain, "snr must be >= 0");
    // libm erfc: rational approximations on sub-intervals, < 1 ulp.
    return 0.5 * std::erfc(std::sqrt(snr / 2.0));
}

double ber_of_state(const PhysicalParams& params, const LightpathGeometry& geom,
                    const LinkState& state) {
    const double snr = snr_linear(received_power_dbm(params, geom, state),
                                  ase_noise_w(params, geom, state));
    return ber_4qam(snr / db_to_linear(params.snr_penalty_db));
}

double ber_at_gain(const PhysicalParams& params, const LightpathGeometry& geom,
                   double nominal_gain_db, double degraded_gain_db) {
    LinkState state = nominal_state(params, geom, nominal_gain_db);
    state.inline_gain_degraded_db = degraded_gain_db;
    return ber_of_state(params, geom, state);
}

double snr_for_ber(double target_ber) {
    require(target_ber > 0.0 && target_ber < 0.5, ErrorKind::NumericDomain,
            "target BER must lie in (0, 0.5)");
    double lo = 0.0;
    double hi = 1.0;
    while (ber_4qam(hi) > target_ber) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ber_4qam(mid) > target_ber ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double critical_gain_db(const PhysicalParams& params, const LightpathGeometry& geom,
                        double nominal_gain_db, double ber_threshold) {
    const double nominal_ber = ber_at_gain(params, geom, nominal_gain_db, nominal_gain_db);
    if (!(nominal_ber < ber_threshold)) {
        throw Error(ErrorKind::Calibration,
                    "BER threshold " + std::to_string(ber_threshold) +
                        " already reached at nominal gain (BER " + std::to_string(nominal_ber) +
                        ")");
    }
    double lo = 1e-9;  // BER above threshold expected here
    double hi = nominal_gain_db;
    if (ber_at_gain(params, geom, nominal_gain_db, lo) <= ber_threshold) {
        throw Error(ErrorKind::Calibration,
                    "BER threshold unreachable for any gain in (0, nominal]");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ber_at_gain(params, geom, nominal_gain_db, mid) > ber_threshold ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double calibrate_snr_penalty_db(PhysicalParams params, const LightpathGeometry& geom,
                                double nominal_gain_db, double ber_threshold,
                                double target_drop_db) {
    require(target_drop_db > 0.0 && target_drop_db < nominal_gain_db,
            ErrorKind::Calibration, "target gain drop must lie in (0, nominal gain)");
    LinkState state = nominal_state(params, geom, nominal_gain_db);
    state.inline_gain_degraded_db = nominal_gain_db - target_drop_db;
    const double snr = snr_linear(received_power_dbm(params, geom, state),
                                  ase_noise_w(params, geom, state));
    return linear_to_db(snr / snr_for_ber(ber_threshold));
}

}  // namespace softfail
