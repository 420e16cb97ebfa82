#pragma once

#include "dsteer/grid.hpp"
#include "dsteer/model.hpp"

#include <string>
#include <vector>

namespace dsteer {

/// A ready-to-run problem: dynamics and costs, initial law, boundary, default grids and control.
struct Preset {
    std::string name;
    ProblemSpec spec;
    InitialDensity rho0;
    StoppingBoundary boundary = StoppingBoundary::none();
    Grid1D grid;
    TimeGrid time_grid;
    Feedback feedback;
    std::string notes;
};

/// Known names: ou, ou_cost, integrator, bm_absorb, american_put_log, brownian_bridge,
/// lq_steer, lq_steer_mean. Throws UnknownPreset otherwise.
Preset make_preset(const std::string& name);

std::vector<std::string> preset_names();

/// Boundary scale of the Brownian-bridge stopping rule b(t) = B sqrt(1 - t), frozen.
inline constexpr double kBridgeBoundaryScale = 0.839923675692;

}  // namespace dsteer
