#include "dsteer/fokker_planck.hpp"

#include "dsteer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsteer {

namespace {

// B(z) = z / (e^z - 1)
double bernoulli(double z) {
    if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
    return z / std::expm1(z);
}

// Interface flux J = alpha * rho_left - beta * rho_right for drift f and diffusion d.
struct FittedFlux {
    double alpha;
    double beta;
};

FittedFlux fitted_flux(double f, double d, double dx) {
    if (d <= 1e-300) return {std::max(f, 0.0), std::max(-f, 0.0)};
    const double w = f * dx / d;
    return {d / dx * bernoulli(-w), d / dx * bernoulli(w)};
}

// Assembles and solves the implicit finite-volume system with half cells at the
// grid ends. `stopped[i]` rows are Dirichlet zero.
std::vector<double> implicit_solve(const std::vector<double>& old, const std::vector<FittedFlux>& flux,
                                   const std::vector<char>& stopped, double dx, double dt) {
    const std::size_t n = old.size();
    std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (stopped[i]) {
            diag[i] = 1.0;
            continue;
        }
        const double vol = (i == 0 || i + 1 == n) ? 0.5 * dx : dx;
        diag[i] = vol / dt;
        rhs[i] = vol / dt * old[i];
        if (i + 1 < n) {
            diag[i] += flux[i].alpha;
            upper[i] = -flux[i].beta;
        }
        if (i > 0) {
            diag[i] += flux[i - 1].beta;
            lower[i] = -flux[i - 1].alpha;
        }
    }
    return solve_tridiagonal(lower, diag, upper, rhs);
}

void check_divergence(const std::vector<double>& v, double limit, double t) {
    for (double x : v) {
        if (!std::isfinite(x) || std::abs(x) > limit)
            throw Error(ErrorKind::SchemeDiverged, "Fokker-Planck density diverged at t=" + std::to_string(t));
    }
}

}  // namespace

Field DensityPath::frame_at(double t) const {
    const auto& tg = time_grid;
    if (t <= tg.t0()) return frames.front();
    if (t >= tg.t1()) return frames.back();
    const double s = (t - tg.t0()) / tg.dt();
    auto k = static_cast<std::size_t>(s);
    if (k >= tg.steps()) k = tg.steps() - 1;
    const double w = s - static_cast<double>(k);
    Field out(frames[k].grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = (1.0 - w) * frames[k].values[i] + w * frames[k + 1].values[i];
    return out;
}

FluxRecord boundary_flux(const Field& frame, double diffusion_half_sq, double t, const StoppingBoundary& boundary) {
    FluxRecord rec;
    rec.t = t;
    if (!boundary.active()) return rec;
    const auto& g = frame.grid;
    const std::size_t n = g.size();
    const double dx = g.dx();
    const auto& r = frame.values;
    std::vector<char> alive(n);
    for (std::size_t i = 0; i < n; ++i) alive[i] = inside_continuation(boundary, t, g.x(i)) ? 1 : 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (alive[k]) continue;
        // alive region to the right: outward normal points left, J.n = D d/dx rho at rho = 0
        if (k + 1 < n && alive[k + 1]) {
            const double slope = (k + 2 < n && alive[k + 2]) ? (-3.0 * r[k] + 4.0 * r[k + 1] - r[k + 2]) / (2.0 * dx)
                                                              : (r[k + 1] - r[k]) / dx;
            rec.flux_left += diffusion_half_sq * slope;
            rec.exit_locations.push_back(g.x(k));
        }
        if (k > 0 && alive[k - 1]) {
            const double slope = (k >= 2 && alive[k - 2]) ? (3.0 * r[k] - 4.0 * r[k - 1] + r[k - 2]) / (2.0 * dx)
                                                          : (r[k] - r[k - 1]) / dx;
            rec.flux_right += -diffusion_half_sq * slope;
            rec.exit_locations.push_back(g.x(k));
        }
    }
    return rec;
}

std::pair<Field, FluxRecord> fp_step(const Field& frame, const ProblemSpec& spec, const Feedback& u, double t,
                                     double dt, const StoppingBoundary& boundary, const FpOptions& opts) {
    const auto& g = frame.grid;
    const std::size_t n = g.size();
    const double dx = g.dx();
    const double t_new = t + dt;
    const double d = spec.half_sigma_sq(t_new);

    std::vector<FittedFlux> flux(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double xm = g.x(i) + 0.5 * dx;
        flux[i] = fitted_flux(spec.drift(t_new, xm, u(t_new, xm)), d, dx);
    }
    std::vector<char> stopped(n, 0);
    if (boundary.active())
        for (std::size_t i = 0; i < n; ++i) stopped[i] = inside_continuation(boundary, t_new, g.x(i)) ? 0 : 1;

    auto next = implicit_solve(frame.values, flux, stopped, dx, dt);
    check_divergence(next, opts.divergence_limit, t_new);
    double clipped = 0.0;
    for (double& v : next)
        if (v < 0.0) {
            clipped -= v * dx;
            v = 0.0;
        }
    Field out(g, std::move(next));
    auto rec = boundary_flux(out, d, t_new, boundary);
    rec.clipped_mass = clipped;
    return {std::move(out), std::move(rec)};
}

DensityPath solve_fp(const ProblemSpec& spec, const Feedback& u, const InitialDensity& rho0, const Grid1D& grid,
                     const TimeGrid& time_grid, const StoppingBoundary& boundary, const FpOptions& opts) {
    Field initial = Field::sample(grid, [&](double x) { return rho0(x); });
    const double on_grid = trapezoid(initial);
    const double total = rho0.total_mass();
    if (!(on_grid >= 0.999 * total))
        throw Error(ErrorKind::MassDeficit, "initial density mass on grid is " + std::to_string(on_grid / total));
    const double t0 = time_grid.t0();
    if (boundary.active())
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (!inside_continuation(boundary, t0, grid.x(i))) initial.values[i] = 0.0;
    for (double& v : initial.values) v /= on_grid;

    DensityPath path;
    path.time_grid = time_grid;
    path.frames.reserve(time_grid.steps() + 1);
    path.alive_mass.reserve(time_grid.steps() + 1);
    path.exit_flux.reserve(time_grid.steps() + 1);

    path.exit_flux.push_back(boundary_flux(initial, spec.half_sigma_sq(t0), t0, boundary));
    path.alive_mass.push_back(trapezoid(initial));
    path.frames.push_back(std::move(initial));

    for (std::size_t k = 0; k < time_grid.steps(); ++k) {
        const double t = time_grid.t(k);
        const double dt = time_grid.t(k + 1) - t;
        auto [next, rec] = fp_step(path.frames.back(), spec, u, t, dt, boundary, opts);
        path.alive_mass.push_back(trapezoid(next));
        path.clipped_mass = std::max(path.clipped_mass, rec.clipped_mass);
        path.exit_flux.push_back(std::move(rec));
        path.frames.push_back(std::move(next));
    }
    return path;
}

std::vector<double> absorbed_mass(const DensityPath& path) {
    const std::size_t m = path.exit_flux.size();
    std::vector<double> out(m, 0.0);
    for (std::size_t k = 1; k < m; ++k) {
        const double dt = path.exit_flux[k].t - path.exit_flux[k - 1].t;
        out[k] = out[k - 1] + 0.5 * dt * (path.exit_flux[k - 1].total() + path.exit_flux[k].total());
    }
    return out;
}

std::vector<double> mass_balance(const DensityPath& path) {
    const auto absorbed = absorbed_mass(path);
    std::vector<double> out(absorbed.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = path.alive_mass[k] + absorbed[k] - 1.0;
    return out;
}

std::pair<double, double> field_moments(const Field& f) {
    const auto& g = f.grid;
    std::vector<double> m1(f.size()), m2(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        m1[i] = g.x(i) * f.values[i];
        m2[i] = g.x(i) * g.x(i) * f.values[i];
    }
    const double mass = trapezoid(f);
    const double mean = trapezoid(m1, g.dx()) / mass;
    const double second = trapezoid(m2, g.dx()) / mass;
    return {mean, second - mean * mean};
}

Field fp_step_variable(const Field& frame, const std::vector<double>& drift_nodes,
                       const std::vector<double>& diffusion_nodes, double dt) {
    const auto& g = frame.grid;
    const std::size_t n = g.size();
    const double dx = g.dx();
    std::vector<FittedFlux> flux(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // J = a p - (D p)' = (a - D') p - D p'
        const double d_mid = 0.5 * (diffusion_nodes[i] + diffusion_nodes[i + 1]);
        const double a_mid = 0.5 * (drift_nodes[i] + drift_nodes[i + 1]) -
                             (diffusion_nodes[i + 1] - diffusion_nodes[i]) / dx;
        flux[i] = fitted_flux(a_mid, d_mid, dx);
    }
    const std::vector<char> stopped(n, 0);
    auto next = implicit_solve(frame.values, flux, stopped, dx, dt);
    check_divergence(next, 1e12, 0.0);
    for (double& v : next)
        if (v < 0.0) v = 0.0;
    return Field(g, std::move(next));
}

}  // namespace dsteer
