#pragma once

#include "dsteer/fokker_planck.hpp"
#include "dsteer/grid.hpp"
#include "dsteer/model.hpp"
#include "dsteer/transform.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dsteer {

/// Costate lambda(t, .) on the shared grid, one frame per time node.
struct CostateField {
    TimeGrid time_grid;
    std::vector<Field> frames;

    const Grid1D& grid() const { return frames.front().grid; }
    Field frame_at(double t) const;
};

/// lambda f + L + (sigma^2 / 2) lambda_x.
double modified_hamiltonian(const ProblemSpec& spec, double t, double x, double u, double lambda, double lambda_x);

/// d/dx Phi - eta d/dx Psi at (tau, x).
double terminal_costate(const ProblemSpec& spec, double eta, double tau, double x);

struct CostateOptions {
    ScoreOptions score;
    /// Transport along f_tilde and add the score source term; off transports along f.
    bool score_corrected = true;
};

/// Backward semi-Lagrangian costate solve over the density path's time grid.
/// Each step traces the f_tilde characteristic from every node one step forward,
/// interpolates lambda there, adds dt (L_x + lambda f_x + D score lambda_x), and
/// solves the D lambda_xx term implicitly. Stopped nodes carry the terminal
/// costate; single-sided boundaries are resolved at sub-cell accuracy, with the
/// boundary point entering both the interpolation and the diffusion stencil.
/// The last frame is terminal_costate at the final time on every node.
CostateField costate_sweep(const ProblemSpec& spec, const Feedback& u, const DensityPath& rho,
                           const StoppingBoundary& boundary, double eta, const CostateOptions& opts = {});

/// Costate-equation defect of `lambda` under the given control and density: the
/// largest |lambda_k - step(lambda_{k+1})| / dt over nodes with a valid score.
double costate_defect(const ProblemSpec& spec, const Feedback& u, const DensityPath& rho,
                      const StoppingBoundary& boundary, double eta, const CostateField& lambda,
                      const CostateOptions& opts = {});

/// L_u + lambda f_u on every node of every frame.
std::vector<Field> stationarity_residual(const ProblemSpec& spec, const Feedback& u, const CostateField& lambda);

/// Modified Hamiltonian plus Phi_t - eta Psi_t at a stopping point.
double stopping_residual(const ProblemSpec& spec, double t, double x, double u, double lambda, double lambda_x,
                         double eta);

/// Density-weighted mean of the stopping residual at a common stopping time tau,
/// given the costate and alive density frames at tau.
double common_stopping_residual(const ProblemSpec& spec, const Field& lambda_tau, const Field& rho_tau,
                                const Feedback& u, double eta, double tau);

/// E[Psi] from an ensemble of stopping states.
double constraint_residual(const ProblemSpec& spec, std::span<const double> x_stop, std::span<const double> t_stop);

/// E[Psi] from a density path: alive mass at the final time plus the flux through
/// absorbing boundaries weighted by Psi at the exit points.
double constraint_residual(const ProblemSpec& spec, const DensityPath& rho);

/// Discrete expected cost: int int L rho dx dt + E[Phi at stop] from the same density path.
double objective_value(const ProblemSpec& spec, const Feedback& u, const DensityPath& rho);

/// Stopping residual along a single-sided boundary, one entry per time node.
struct BoundaryResidual {
    double t = 0.0;
    double b = 0.0;
    double residual = 0.0;
};

/// Evaluates the stopping-time residual at the boundary point b(t) for every time node t <= t_max, with
/// lambda_x taken from a one-sided quadratic through the boundary value and the
/// two nearest alive nodes.
std::vector<BoundaryResidual> boundary_stopping_residuals(const ProblemSpec& spec, const Feedback& u,
                                                          const CostateField& lambda,
                                                          const StoppingBoundary& boundary, double eta,
                                                          double t_max);

enum class StoppingMode { FixedHorizon, Common, BoundaryTemplate };

/// What the sweep is free to adjust besides the control.
struct SweepTargets {
    StoppingMode mode = StoppingMode::FixedHorizon;
    /// Fixed absorbing boundary (FixedHorizon and Common modes).
    StoppingBoundary boundary = StoppingBoundary::none();
    /// Common mode: initial pair of secant guesses for tau.
    double tau_guess_a = 0.5;
    double tau_guess_b = 0.6;
    /// BoundaryTemplate mode: b(t) = scale * shape(t), stopping above or below it.
    TimeMap shape;
    bool stop_above = true;
    double scale_guess = 1.0;
    /// Residuals at t <= fit_until enter the scale fit.
    double fit_until = 0.9;
};

struct SweepConfig {
    double damping = 0.5;
    std::size_t max_iters = 50;
    double tol = 1e-3;
    double eta_a = 0.0;
    double eta_b = 0.1;
    double eta_tol = 1e-4;
    std::size_t max_outer = 30;
    double outer_tol = 1e-8;
    CostateOptions costate;
    std::optional<Feedback> initial_control;
    int jobs = 1;
};

/// Per-iteration maxima: stationarity (os1), costate defect of the previous
/// costate under the new control and density (os2), terminal constraint (os4),
/// stopping condition (os5).
struct ResidualRecord {
    std::size_t iter = 0;
    double os1 = 0.0;
    double os2 = 0.0;
    double os4 = 0.0;
    double os5 = 0.0;
    double objective = 0.0;
};

struct SweepState {
    TimeGrid time_grid;
    std::vector<Field> controls;
    CostateField costate;
    double eta = 0.0;
    std::optional<TimeAssignment> time_assignment;
    std::optional<double> boundary_scale;
    StoppingBoundary boundary = StoppingBoundary::none();
    DensityPath density;
    std::vector<ResidualRecord> history;
    bool converged = false;
    /// Iterations where the objective rose by more than 1e-6.
    std::size_t objective_increases = 0;

    Feedback feedback() const;
    const ResidualRecord& last() const { return history.back(); }
};

/// Forward-backward sweep: density under the current control, costate backward,
/// relaxed control update from the stationarity condition (closed form when the
/// spec is control affine-quadratic, otherwise one damped Newton step), then a
/// secant update of eta on E[Psi] and of the stopping parameter on its residual.
/// Throws NotConverged only through `require_converged`; the state always carries
/// its residual history.
SweepState fb_sweep(const ProblemSpec& spec, const InitialDensity& rho0, const Grid1D& grid, const TimeGrid& time_grid,
                    const SweepTargets& targets, const SweepConfig& cfg = {});

/// Throws NotConverged with the last residuals when the sweep did not converge.
void require_converged(const SweepState& state);

}  // namespace dsteer
