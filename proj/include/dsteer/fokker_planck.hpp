#pragma once

#include "dsteer/grid.hpp"
#include "dsteer/model.hpp"

#include <utility>
#include <vector>

namespace dsteer {

/// Outward probability-mass rate through the absorbing boundaries at time t.
struct FluxRecord {
    double t = 0.0;
    double flux_left = 0.0;
    double flux_right = 0.0;
    std::vector<double> exit_locations;
    double clipped_mass = 0.0;  // negative mass removed by clipping in the step ending at t

    double total() const noexcept { return flux_left + flux_right; }
};

/// Alive (sub-probability) density on a grid for every time node.
struct DensityPath {
    TimeGrid time_grid;
    std::vector<Field> frames;
    std::vector<double> alive_mass;
    std::vector<FluxRecord> exit_flux;  // one per time node; index 0 from the initial frame
    double clipped_mass = 0.0;          // largest negative mass removed in a single step

    const Grid1D& grid() const { return frames.front().grid; }
    /// Linear interpolation between the two bracketing frames.
    Field frame_at(double t) const;
};

struct FpOptions {
    /// Values above this (or non-finite) abort with SchemeDiverged.
    double divergence_limit = 1e12;
};

/// One implicit step of d/dt rho = -d/dx [f rho - D d/dx rho], D = sigma_t^2 / 2,
/// with an exponentially fitted (Scharfetter-Gummel / Chang-Cooper) flux. Nodes
/// outside the continuation region at t + dt are held at zero; grid ends are
/// zero-flux. Unconditionally stable and positivity preserving for any dt.
std::pair<Field, FluxRecord> fp_step(const Field& frame, const ProblemSpec& spec, const Feedback& u, double t,
                                     double dt, const StoppingBoundary& boundary, const FpOptions& opts = {});

/// Outward flux through every absorbing node adjacent to the alive region,
/// from a second-order one-sided derivative of rho at that node.
FluxRecord boundary_flux(const Field& frame, double diffusion_half_sq, double t, const StoppingBoundary& boundary);

/// Full forward solve. The initial density is sampled on the grid, zeroed on
/// stopped nodes, and rescaled to unit trapezoid mass; MassDeficit when less
/// than 0.999 of it falls on the grid.
DensityPath solve_fp(const ProblemSpec& spec, const Feedback& u, const InitialDensity& rho0, const Grid1D& grid,
                     const TimeGrid& time_grid, const StoppingBoundary& boundary, const FpOptions& opts = {});

/// Series of alive + absorbed - 1, absorbed being the time-trapezoid of the total exit flux.
std::vector<double> mass_balance(const DensityPath& path);

/// Cumulative absorbed mass per time node.
std::vector<double> absorbed_mass(const DensityPath& path);

/// Mean and variance of a (sub-)density, normalized by its own mass.
std::pair<double, double> field_moments(const Field& f);

/// Implicit step for the general 1-D form d/dt p = -d/dy [a(y) p - d/dy (D(y) p)]
/// with zero-flux ends; used where the diffusion depends on the state.
Field fp_step_variable(const Field& frame, const std::vector<double>& drift_nodes,
                       const std::vector<double>& diffusion_nodes, double dt);

}  // namespace dsteer
