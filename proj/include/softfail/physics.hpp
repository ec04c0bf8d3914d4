#pragma once

#include <vector>

namespace softfail {

/// Physical-layer constants of the simulated lightpath. Defaults are the
/// reference values for a 4-QAM coherent link with broadcast-and-select nodes.
struct PhysicalParams {
    double transmit_power_dbm = -17.0;
    double carrier_frequency_hz = 193.1e12;
    double nsp_inline = 3.0;
    double nsp_booster = 2.0;
    double fiber_attenuation_db_per_km = 0.2;
    double wss_loss_db = 2.0;
    double tap_loss_db = 1.0;
    double edfa_spacing_km = 100.0;
    double booster_gain_db = 8.0;
    // When set, booster gains follow 3*ceil(log2 Q) + L_WSS instead of the
    // fixed booster_gain_db.
    bool booster_gain_from_rule = false;
    double electrical_bandwidth_hz = 7e9;
    double planck_j_s = 6.62e-34;
    // Receiver-side SNR penalty applied by the full chain (ber_of_state). Zero
    // leaves the textbook chain untouched; see calibrate_snr_penalty_db.
    double snr_penalty_db = 0.0;

    /// Throws Error(InvalidArgument) when a constant is out of range.
    void validate() const;

    /// 2 h f_c B_e, the per-amplifier ASE scale in watts.
    double gamma() const;
};

/// Route of a single lightpath. Amplifier and hop counts are derived from the
/// link lengths by from_links(); validate() checks a hand-built instance.
struct LightpathGeometry {
    std::vector<double> span_lengths_km;
    int hops = 0;
    int inline_edfa_count = 0;
    // Fiber port count of every intermediate node (hops - 1 entries); each
    // one hosts a booster amplifier.
    std::vector<int> node_degree_q;
    // 1-based index of the in-line amplifier whose gain degrades.
    int degraded_edfa_index = 1;

    static LightpathGeometry from_links(const std::vector<double>& link_lengths_km,
                                        double edfa_spacing_km,
                                        std::vector<int> node_degree_q,
                                        int degraded_edfa_index);

    /// Two links of 400 and 300 km, nodal degree 3 (four ports), first
    /// amplifier degrading.
    static LightpathGeometry reference(const PhysicalParams& params = {});

    void validate(const PhysicalParams& params) const;
};

struct LinkState {
    double inline_gain_nominal_db = 22.0;
    double inline_gain_degraded_db = 22.0;
    std::vector<double> booster_gains_db;
};

double db_to_linear(double db);
double linear_to_db(double linear);
double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// 3 * ceil(log2 q_ports) + wss_loss_db: the smallest booster gain that
/// covers the splitter and the WSS of a Q-port node.
double booster_gain_db(int q_ports, double wss_loss_db);

/// alpha * span + L_tap.
double inline_gain_nominal_db(const PhysicalParams& params, double span_km);

/// Booster gains per intermediate node, honoring booster_gain_from_rule.
std::vector<double> booster_gains_db(const PhysicalParams& params,
                                     const LightpathGeometry& geom);

/// Link state with every amplifier at its nominal gain.
LinkState nominal_state(const PhysicalParams& params, const LightpathGeometry& geom,
                        double inline_gain_db);

/// Received power in dBm. The whole budget is kept in the dB domain and the
/// fiber loss is M * alpha * spacing.
double received_power_dbm(const PhysicalParams& params, const LightpathGeometry& geom,
                          const LinkState& state);

/// Accumulated ASE noise in watts. Gains are converted to linear units first.
double ase_noise_w(const PhysicalParams& params, const LightpathGeometry& geom,
                   const LinkState& state);

/// Signal (dBm, converted to watts) over noise (watts).
double snr_linear(double signal_dbm, double noise_w);

/// erfc(sqrt(snr / 2)) / 2.
double ber_4qam(double snr);

/// Full chain: power, noise, SNR (less snr_penalty_db) and 4-QAM BER.
double ber_of_state(const PhysicalParams& params, const LightpathGeometry& geom,
                    const LinkState& state);

/// BER with the degrading amplifier at degraded_gain_db and every other
/// amplifier nominal.
double ber_at_gain(const PhysicalParams& params, const LightpathGeometry& geom,
                   double nominal_gain_db, double degraded_gain_db);

/// SNR at which ber_4qam equals target_ber (bisection in the log domain).
double snr_for_ber(double target_ber);

/// Degraded gain at which the chain BER equals ber_threshold. Throws
/// Error(Calibration) if the threshold is already exceeded at nominal gain or
/// never reached above 0 dB.
double critical_gain_db(const PhysicalParams& params, const LightpathGeometry& geom,
                        double nominal_gain_db, double ber_threshold);

/// SNR penalty that moves the ber_threshold crossing to a gain reduction of
/// exactly target_drop_db below nominal. Negative results mean the textbook
/// chain already fails before target_drop_db.
double calibrate_snr_penalty_db(PhysicalParams params, const LightpathGeometry& geom,
                                double nominal_gain_db, double ber_threshold,
                                double target_drop_db);

}  // namespace softfail
