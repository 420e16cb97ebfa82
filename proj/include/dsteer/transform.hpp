#pragma once

#include "dsteer/fokker_planck.hpp"
#include "dsteer/grid.hpp"
#include "dsteer/model.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace dsteer {

/// d/dx log rho on a grid. Nodes where rho is below the floor, or within the
/// boundary layer of an absorbing node, are masked and carry the value of the
/// nearest valid node.
struct ScoreField {
    Grid1D grid;
    std::vector<double> values;
    std::vector<char> valid;

    Field as_field() const { return Field(grid, values); }
    std::size_t valid_count() const;
};

struct ScoreOptions {
    double floor_rel = 1e-10;   // floor = floor_rel * max(rho)
    double layer_cells = 3.0;   // boundary-layer width in grid cells
};

/// floor_rel * max(rho), never below the smallest positive double.
double default_score_floor(const Field& frame, double floor_rel = 1e-10);

ScoreField score_field(const Field& frame, double floor, double layer_width, const StoppingBoundary& boundary,
                       double t);

/// f_tilde = f(t, x, u(t, x)) - (sigma_t^2 / 2) * score.
Field transformed_drift(const ProblemSpec& spec, const Feedback& u, const ScoreField& score, double t);

/// Score-corrected velocity on every frame of a density path.
struct VelocityField {
    TimeGrid time_grid;
    Grid1D grid;
    std::vector<std::vector<double>> frames;  // f_tilde per time node
    std::vector<ScoreField> scores;
    /// Discrete int int |f_tilde|^2 rho dx dt over valid nodes.
    double kinetic_budget = 0.0;

    /// Bilinear (t, x) interpolation, clamped at the edges.
    double at(double t, double x) const;
    Field frame(std::size_t k) const { return Field(grid, frames[k]); }
};

VelocityField build_velocity_field(const ProblemSpec& spec, const Feedback& u, const DensityPath& path,
                                   const StoppingBoundary& boundary, const ScoreOptions& opts = {});

/// Characteristic particles of the transformed (deterministic) dynamics.
struct ParticleEnsemble {
    static constexpr double kUnstopped = std::numeric_limits<double>::infinity();

    std::vector<double> initial;
    std::vector<double> positions;
    std::vector<char> alive;
    std::vector<char> clamped;
    std::vector<double> stop_time;

    static ParticleEnsemble from_positions(std::vector<double> x0);
    /// Deterministic mid-point quantiles of the initial density.
    static ParticleEnsemble from_quantiles(const InitialDensity& rho0, std::size_t count);

    std::size_t size() const noexcept { return positions.size(); }
    std::size_t alive_count() const;
    double alive_fraction() const;
    std::vector<double> alive_positions() const;
};

/// What stops a particle: first entry into the stopped region and/or reaching tau(x0).
struct StopRule {
    StoppingBoundary boundary = StoppingBoundary::none();
    std::optional<TimeAssignment> time_assignment;
};

/// One RK4 step of dx/dt = f_tilde(t, x) for every alive particle. A particle whose
/// boundary level changes sign within the step is stopped at the linearly
/// interpolated crossing; one whose tau(x0) falls inside the step is integrated
/// exactly to tau and stopped there.
void advect_step(ParticleEnsemble& ensemble, const VelocityField& velocity, const StopRule& rule, double t, double dt,
                 int jobs = 1);

/// Repeated advect_step from t_start to t_end with step at most dt.
void advect_particles(ParticleEnsemble& ensemble, const VelocityField& velocity, const StopRule& rule,
                      double t_start, double t_end, double dt, int jobs = 1);

/// 0.9 min(sd, IQR / 1.34) n^(-1/5).
double silverman_bandwidth(std::span<const double> sample);

/// Gaussian KDE of the alive particles on a grid, each particle weighing 1/N, so
/// the result integrates to the alive fraction. Linear binning followed by a
/// discrete convolution. Needs at least 100 alive particles.
Field pushforward_density(const ParticleEnsemble& ensemble, const Grid1D& grid,
                          std::optional<double> bandwidth = std::nullopt);

/// Strictly monotone C^2 map with its first two derivatives.
struct MonotoneMap {
    std::function<double(double)> value;
    std::function<double(double)> first;
    std::function<double(double)> second;
};

struct ItoRecoveryConfig {
    Grid1D x_grid;
    TimeGrid time_grid;          // [0, horizon]
    std::size_t particles = 100000;
    std::size_t y_points = 0;    // 0: chosen so the y spacing matches min|g'| * dx
    int jobs = 1;
};

/// W1 at the horizon between g(x_t) with x_t following the transformed
/// characteristics, and the Fokker-Planck density of the Ito image SDE
/// dy = [g' f + sigma^2 g'' / 2] dt + g' sigma dw solved on its own y grid.
double ito_recovery_residual(const ProblemSpec& spec, const Feedback& u, const InitialDensity& rho0,
                             const MonotoneMap& g, const ItoRecoveryConfig& cfg);

}  // namespace dsteer
