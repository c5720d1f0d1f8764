#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mfg/fixedpoint.hpp"
#include "mfg/model.hpp"

namespace mfg {

/// Raised for malformed or out-of-range run configs (CLI exit code 3).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A fully resolved run configuration: every default filled in, grids
/// constructed, ready to build the model. `resolved` carries the
/// defaults-filled JSON that solve runs archive next to their outputs.
struct RunConfig {
    std::string family;
    nlohmann::json model_json;
    StateLattice lattice;
    TimeGrid timegrid;
    ControlSpace controls;
    SolveConfig solver;
    std::filesystem::path out_dir;
    nlohmann::json resolved;

    RunConfig(StateLattice l, TimeGrid t, ControlSpace c)
        : lattice(std::move(l)), timegrid(t), controls(std::move(c)) {}
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& file);

/// Instantiates the model family named by the config (lq | custom-table).
MFGModel build_model(const RunConfig& config);

/// Deterministic sample cloud over the config's grids for validate_growth.
std::vector<GrowthSample> default_sample_cloud(const RunConfig& config, const MFGModel& model,
                                               const DiscreteMeasure& mu);

std::string format17(double x);

}  // namespace mfg
