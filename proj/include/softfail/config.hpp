#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "softfail/aging.hpp"
#include "softfail/dataset.hpp"
#include "softfail/forecaster.hpp"
#include "softfail/physics.hpp"
#include "softfail/policy.hpp"

namespace softfail {

struct GeometryConfig {
    std::vector<double> link_lengths_km = {400.0, 300.0};
    std::vector<int> node_degree_q = {4};
    int degraded_edfa_index = 1;

    LightpathGeometry build(const PhysicalParams& params) const;
};

struct CalibrationConfig {
    bool enabled = true;
    CalibrationTarget target;
};

struct PolicyConfig {
    HardFailureSpec hard_failure;
    std::vector<double> fixed_reductions_db = {5.0, 7.0, 10.0};
};

/// Fully resolved configuration of one run.
struct RunConfig {
    std::string preset = "paper";
    PhysicalParams physics;
    GeometryConfig geometry;
    WeibullProcessParams aging;
    CalibrationConfig calibration;
    WindowSpec window;
    DatasetOptions dataset;
    ModelShape model;  // past_len / horizon are taken from window
    TrainConfig train;
    PolicyConfig policy;
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    /// Copies window constants into the model shape and validates.
    void finalize();
};

/// Built-in presets: "paper" (full-size constants) and "desk" (small
/// trace and network that train in minutes).
RunConfig preset_config(const std::string& name);

/// Applies a JSON document over base. Unknown keys and type mismatches
/// throw Error(Config).
RunConfig apply_config_json(RunConfig base, const std::string& json_text);
RunConfig load_config_file(RunConfig base, const std::string& path);

/// Every field, as pretty-printed JSON with sorted keys.
std::string config_to_json(const RunConfig& config);

}  // namespace softfail
