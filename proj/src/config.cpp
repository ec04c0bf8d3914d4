#include "softfail/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "softfail/error.hpp"

namespace softfail {

using nlohmann::json;

LightpathGeometry GeometryConfig::build(const PhysicalParams& params) const {
    auto g = LightpathGeometry::from_links(link_lengths_km, params.edfa_spacing_km, node_degree_q,
                                           degraded_edfa_index);
    g.validate(params);
    return g;
}

void RunConfig::finalize() {
    model.past_len = window.past_len;
    model.horizon = window.future_len;
    model.input_features = 1;
    physics.validate();
    (void)geometry.build(physics);
    aging.validate();
    window.validate();
    model.validate();
    if (train.batch_size == 0) throw Error(ErrorKind::Config, "train.batch_size must be >= 1");
    if (!(policy.hard_failure.ber_threshold > 0.0 && policy.hard_failure.ber_threshold < 0.5)) {
        throw Error(ErrorKind::Config, "policy.hard_ber must lie in (0, 0.5)");
    }
}

RunConfig preset_config(const std::string& name) {
    RunConfig c;
    c.preset = name;
    // Both presets place the 1e-3 crossing at a 9.5 dB gain reduction, 95% of
    // the way through the trace.
    c.calibration.target.hard_failure_drop_db = 9.5;
    if (name == "paper") {
        c.dataset.transform = TargetTransform::Raw;
    } else if (name == "desk") {
        // A short trace with dense events: each tau period holds thousands of
        // small degradation steps, so the BER rise over the next s periods
        // is close to deterministic. The dataset keeps the last 630 tau
        // samples (600 windows at stride 1); the 0.9 crossing falls in the
        // validation rows, so the model is fitted on pre-failure data only.
        c.aging.horizon_samples = 120'000;
        c.aging.sample_interval = 10'000.0;
        c.calibration.target.crossing_fraction = 0.9;
        c.window.past_len = 20;
        c.window.future_len = 10;
        c.window.stride = 1;
        c.window.max_tau_samples = 630;
        c.model.hidden_units = 16;
        c.dataset.transform = TargetTransform::Log10;
        c.dataset.normalizer = NormalizerKind::ZScore;
        c.train.epochs = 100;
        c.train.learning_rate = 1e-3;
    } else {
        throw Error(ErrorKind::Config, "unknown preset '" + name + "' (paper|desk)");
    }
    c.finalize();
    return c;
}

namespace {

// Reads fields out of one JSON object and rejects keys nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw Error(ErrorKind::Config, path_ + " must be an object");
    }

    template <typename T>
    void field(const char* key, T& out) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Config, path_ + "." + key + ": " + e.what());
        }
    }

    void optional_number(const char* key, std::optional<double>& out) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return;
        if (it->is_null()) {
            out.reset();
        } else if (it->is_number()) {
            out = it->get<double>();
        } else {
            throw Error(ErrorKind::Config, path_ + "." + key + ": expected number or null");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string path(const char* key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!seen_.count(k)) throw Error(ErrorKind::Config, "unknown key " + path_ + "." + k);
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
void section(ObjectReader& parent, const char* key, Fn&& fn) {
    if (const json* j = parent.child(key)) {
        ObjectReader r(*j, parent.path(key));
        fn(r);
        r.finish();
    }
}

json to_json(const RunConfig& c) {
    json j;
    j["preset"] = c.preset;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    const auto& p = c.physics;
    j["physics"] = {{"transmit_power_dbm", p.transmit_power_dbm},
                    {"carrier_frequency_hz", p.carrier_frequency_hz},
                    {"nsp_inline", p.nsp_inline},
                    {"nsp_booster", p.nsp_booster},
                    {"fiber_attenuation_db_per_km", p.fiber_attenuation_db_per_km},
                    {"wss_loss_db", p.wss_loss_db},
                    {"tap_loss_db", p.tap_loss_db},
                    {"edfa_spacing_km", p.edfa_spacing_km},
                    {"booster_gain_db", p.booster_gain_db},
                    {"booster_gain_from_rule", p.booster_gain_from_rule},
                    {"electrical_bandwidth_hz", p.electrical_bandwidth_hz},
                    {"planck_j_s", p.planck_j_s},
                    {"snr_penalty_db", p.snr_penalty_db}};
    j["geometry"] = {{"link_lengths_km", c.geometry.link_lengths_km},
                     {"node_degree_q", c.geometry.node_degree_q},
                     {"degraded_edfa_index", c.geometry.degraded_edfa_index}};
    const auto& a = c.aging;
    j["aging"] = {{"scale_lambda", a.scale_lambda},
                  {"shape_beta", a.shape_beta},
                  {"degradation_step_db", a.degradation_step_db},
                  {"initial_gain_db", a.initial_gain_db},
                  {"horizon_samples", a.horizon_samples},
                  {"sample_interval", a.sample_interval},
                  {"units_per_event", a.units_per_event}};
    const auto& t = c.calibration.target;
    j["calibration"] = {{"enabled", c.calibration.enabled},
                        {"hard_ber", t.hard_ber},
                        {"crossing_fraction", t.crossing_fraction},
                        {"hard_failure_drop_db", t.hard_failure_drop_db
                                                     ? json(*t.hard_failure_drop_db)
                                                     : json(nullptr)}};
    const auto& w = c.window;
    j["window"] = {{"tau_minutes", w.tau_minutes},
                   {"past_len", w.past_len},
                   {"future_len", w.future_len},
                   {"stride", w.stride},
                   {"raw_sample_minutes", w.raw_sample_minutes},
                   {"max_tau_samples", w.max_tau_samples}};
    j["dataset"] = {{"transform", to_string(c.dataset.transform)},
                    {"normalizer", to_string(c.dataset.normalizer)},
                    {"train_fraction", c.dataset.train_fraction},
                    {"val_fraction_of_train", c.dataset.val_fraction_of_train}};
    j["model"] = {{"hidden_units", c.model.hidden_units},
                  {"dense_units", c.model.dense_units},
                  {"use_bias", c.model.use_bias}};
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"batch_size", c.train.batch_size},
                  {"epochs", c.train.epochs},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"epsilon", c.train.epsilon},
                  {"seed", c.train.seed}};
    j["policy"] = {{"hard_ber", c.policy.hard_failure.ber_threshold},
                   {"fixed_reductions_db", c.policy.fixed_reductions_db}};
    return j;
}

}  // namespace

RunConfig apply_config_json(RunConfig c, const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
    }
    ObjectReader root(doc, "config");
    std::string preset = c.preset;
    root.field("preset", preset);
    if (preset != c.preset) {
        // A preset named in the file replaces the base before overrides apply.
        c = preset_config(preset);
    }
    root.field("seed", c.seed);
    root.field("out_dir", c.out_dir);
    section(root, "physics", [&](ObjectReader& r) {
        auto& p = c.physics;
        r.field("transmit_power_dbm", p.transmit_power_dbm);
        r.field("carrier_frequency_hz", p.carrier_frequency_hz);
        r.field("nsp_inline", p.nsp_inline);
        r.field("nsp_booster", p.nsp_booster);
        r.field("fiber_attenuation_db_per_km", p.fiber_attenuation_db_per_km);
        r.field("wss_loss_db", p.wss_loss_db);
        r.field("tap_loss_db", p.tap_loss_db);
        r.field("edfa_spacing_km", p.edfa_spacing_km);
        r.field("booster_gain_db", p.booster_gain_db);
        r.field("booster_gain_from_rule", p.booster_gain_from_rule);
        r.field("electrical_bandwidth_hz", p.electrical_bandwidth_hz);
        r.field("planck_j_s", p.planck_j_s);
        r.field("snr_penalty_db", p.snr_penalty_db);
    });
    section(root, "geometry", [&](ObjectReader& r) {
        r.field("link_lengths_km", c.geometry.link_lengths_km);
        r.field("node_degree_q", c.geometry.node_degree_q);
        r.field("degraded_edfa_index", c.geometry.degraded_edfa_index);
    });
    section(root, "aging", [&](ObjectReader& r) {
        auto& a = c.aging;
        r.field("scale_lambda", a.scale_lambda);
        r.field("shape_beta", a.shape_beta);
        r.field("degradation_step_db", a.degradation_step_db);
        r.field("initial_gain_db", a.initial_gain_db);
        r.field("horizon_samples", a.horizon_samples);
        r.field("sample_interval", a.sample_interval);
        r.field("units_per_event", a.units_per_event);
    });
    section(root, "calibration", [&](ObjectReader& r) {
        r.field("enabled", c.calibration.enabled);
        r.field("hard_ber", c.calibration.target.hard_ber);
        r.field("crossing_fraction", c.calibration.target.crossing_fraction);
        r.optional_number("hard_failure_drop_db", c.calibration.target.hard_failure_drop_db);
    });
    section(root, "window", [&](ObjectReader& r) {
        auto& w = c.window;
        r.field("tau_minutes", w.tau_minutes);
        r.field("past_len", w.past_len);
        r.field("future_len", w.future_len);
        r.field("stride", w.stride);
        r.field("raw_sample_minutes", w.raw_sample_minutes);
        r.field("max_tau_samples", w.max_tau_samples);
    });
    section(root, "dataset", [&](ObjectReader& r) {
        std::string transform = to_string(c.dataset.transform);
        std::string normalizer = to_string(c.dataset.normalizer);
        r.field("transform", transform);
        r.field("normalizer", normalizer);
        r.field("train_fraction", c.dataset.train_fraction);
        r.field("val_fraction_of_train", c.dataset.val_fraction_of_train);
        c.dataset.transform = parse_transform(transform);
        c.dataset.normalizer = parse_normalizer(normalizer);
    });
    section(root, "model", [&](ObjectReader& r) {
        r.field("hidden_units", c.model.hidden_units);
        r.field("dense_units", c.model.dense_units);
        r.field("use_bias", c.model.use_bias);
    });
    section(root, "train", [&](ObjectReader& r) {
        auto& t = c.train;
        r.field("learning_rate", t.learning_rate);
        r.field("batch_size", t.batch_size);
        r.field("epochs", t.epochs);
        r.field("beta1", t.beta1);
        r.field("beta2", t.beta2);
        r.field("epsilon", t.epsilon);
        r.field("seed", t.seed);
    });
    section(root, "policy", [&](ObjectReader& r) {
        r.field("hard_ber", c.policy.hard_failure.ber_threshold);
        r.field("fixed_reductions_db", c.policy.fixed_reductions_db);
    });
    root.finish();
    try {
        c.finalize();
    } catch (const Error& e) {
        throw Error(ErrorKind::Config, std::string("invalid configuration: ") + e.what());
    }
    return c;
}

RunConfig load_config_file(RunConfig base, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return apply_config_json(std::move(base), ss.str());
}

std::string config_to_json(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace softfail
