#pragma once

#include "dsteer/grid.hpp"
#include "dsteer/model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace dsteer {

/// Complementarity diagnostics of an obstacle solve, in value units.
struct ComplementarityReport {
    double min_continuation = 0.0;  // min over nodes of (LV + L), scaled by the row diagonal
    double min_gap = 0.0;           // min over nodes of (obstacle - V)
    double max_product = 0.0;       // max over nodes of |(LV + L) * (obstacle - V)|
};

/// Value function frames, optional optimal controls, and the free boundary.
struct ValueField {
    TimeGrid time_grid;
    std::vector<Field> frames;
    std::vector<Field> controls;  // empty when the solve is uncontrolled
    std::vector<std::optional<double>> free_boundary;
    std::optional<ComplementarityReport> complementarity;
    std::size_t iterations = 0;  // PSOR sweeps (obstacle solves) summed over all steps

    const Grid1D& grid() const { return frames.front().grid; }
    Field frame_at(double t) const;
    /// Bilinear interpolation of the stored optimal controls.
    Feedback feedback() const;
};

struct HamiltonianMin {
    double control = 0.0;
    double value = 0.0;  // f V_x + L + (sigma^2 / 2) V_xx at the minimizer
};

/// argmin_u [f(t,x,u) V_x + L(t,x,u)] over [control_min, control_max]. Closed form
/// (clipped) when the spec is control affine-quadratic, the single admissible value
/// when the box is degenerate, otherwise a search over the admissible points of
/// u_grid where the lowest index wins ties.
HamiltonianMin minimize_hamiltonian(const ProblemSpec& spec, double t, double x, double v_x, double v_xx,
                                    std::span<const double> u_grid = {});

struct HjbOptions {
    std::vector<double> u_grid;
    /// Replaces Phi(t1, .) as the data at the final time node.
    std::optional<Field> terminal;
};

/// Backward semi-implicit sweep: explicit Hamiltonian with central V_x where the
/// cell Peclet number |f| dx / (2 D) is at most one and upwind V_x elsewhere
/// (sub-stepped so the explicit part stays stable), implicit diffusion and discount,
/// V = Phi(t, x) on stopped nodes, and extrapolated second derivative at the
/// grid ends.
ValueField solve_hjb_dirichlet(const ProblemSpec& spec, const StoppingBoundary& boundary, const Grid1D& grid,
                               const TimeGrid& time_grid, const HjbOptions& opts = {});

enum class ViEnds { Obstacle, Linear };

struct ViOptions {
    bool stationary = false;
    TimeGrid time_grid;  // horizon mode
    double omega = 1.5;
    double psor_tol = 1e-12;
    std::size_t psor_max_iter = 500000;
    double pseudo_dt = 10.0;
    double stationary_tol = 1e-8;
    std::size_t max_pseudo_steps = 100000;
    ViEnds ends = ViEnds::Obstacle;
    double contact_tol = 1e-10;
    Feedback control;  // defaults to u = 0
};

/// Projected SOR on the fully implicit upwind discretization of
/// min(dV/dt + f V_x + D V_xx - r V + L, Psi - V) = 0 (stopping cost Psi caps the
/// value from above). Stationary mode marches in pseudo-time until the relative
/// frame change drops below stationary_tol. The free boundary is the contact-set
/// edge, placed at sub-grid resolution by linear interpolation of sqrt(Psi - V),
/// which is exact for the quadratic gap that smooth pasting produces.
ValueField solve_obstacle_vi(const ProblemSpec& spec, const SpaceTimeMap& obstacle, const Grid1D& grid,
                             const ViOptions& opts);

/// Feedback from per-time-node control frames: linear in t between frames and in x within a frame.
Feedback tabulated_feedback(const TimeGrid& time_grid, std::vector<Field> frames);

/// Contact-set edge of a single frame; nullopt when there is no edge.
std::optional<double> contact_edge(const Field& value, const Field& obstacle, double contact_tol);

/// E_{x ~ mu}[V(t, x)] = trapezoid of V(t, .) mu on V's grid (mu linearly interpolated, zero outside).
double distributional_value(const ValueField& value, const Field& mu, double t);

}  // namespace dsteer
