#pragma once

#include "dsteer/presets.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dsteer {

/// Flat key = value run configuration. Section headers ([grid], [time], ...) only
/// group keys; every key lives in one namespace. Unset optionals fall back to
/// the preset's defaults.
struct RunConfig {
    std::string preset = "ou";
    std::optional<double> x_min, x_max, dx;
    std::optional<double> t0, horizon, dt;
    std::optional<double> sigma;
    std::size_t paths = 10000;
    std::optional<double> mc_dt;
    std::uint64_t seed = 1;
    int jobs = 0;
    std::size_t particles = 10000;
    std::size_t frame_stride = 1;
    double tol_scale = 1.0;
    double omega = 1.5;
    std::optional<bool> stationary;
    double damping = 0.5;
    std::size_t max_iters = 50;
    double tol = 1e-3;
    std::string out = "out";

    /// Key/value pairs in file order, for the run manifest.
    std::vector<std::pair<std::string, std::string>> echo;
};

RunConfig parse_config_string(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

/// Field-level checks; throws ValidationError(field, reason).
void validate(const RunConfig& cfg);

/// The named preset with the configuration's grid, time and sigma overrides applied.
Preset resolve_preset(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace dsteer
