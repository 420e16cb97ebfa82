#include "dsteer/errors.hpp"
#include "dsteer/fokker_planck.hpp"
#include "dsteer/presets.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace dsteer;

namespace {

double normal_pdf(double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

ProblemSpec drift_diffusion(std::function<double(double)> f, double sigma) {
    ProblemSpec s;
    s.drift = [f](double, double x, double) { return f(x); };
    s.diffusion = [sigma](double) { return sigma; };
    s.running_cost = [](double, double, double) { return 0.0; };
    s.terminal_cost = [](double, double) { return 0.0; };
    return s;
}

double reflection_survival(double x0, double t) { return std::erf(x0 / std::sqrt(2.0 * t)); }

}  // namespace

TEST_CASE("pure diffusion spreads at rate sigma^2") {
    const auto spec = drift_diffusion([](double) { return 0.0; }, std::sqrt(2.0));
    const Grid1D g = Grid1D::with_spacing(-14.0, 14.0, 0.02);
    Field rho = Field::sample(g, [](double x) { return normal_pdf(x, 0.0, 1.0); });
    for (int k = 0; k < 1000; ++k) rho = fp_step(rho, spec, zero_feedback(), k * 1e-3, 1e-3, StoppingBoundary::none()).first;
    const auto [mean, var] = field_moments(rho);
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(var - 3.0) <= 0.02 * 3.0);
}

TEST_CASE("the OU stationary Gaussian stays put") {
    const auto spec = drift_diffusion([](double x) { return -x; }, std::sqrt(2.0));
    const Grid1D g = Grid1D::with_spacing(-8.0, 8.0, 0.01);
    const Field start = Field::sample(g, [](double x) { return normal_pdf(x, 0.0, 1.0); });
    Field rho = start;
    for (int k = 0; k < 1000; ++k) rho = fp_step(rho, spec, zero_feedback(), k * 1e-3, 1e-3, StoppingBoundary::none()).first;
    double drift = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) drift = std::max(drift, std::abs(rho[i] - start[i]));
    CHECK(drift <= 1e-3);
}

TEST_CASE("absorbed Brownian motion survives per the reflection principle") {
    const Preset p = make_preset("bm_absorb");
    const DensityPath path = solve_fp(p.spec, p.feedback, p.rho0, p.grid, p.time_grid, p.boundary);
    const double oracle = reflection_survival(1.0, 1.0);
    CHECK(std::abs(path.alive_mass.back() / oracle - 1.0) <= 0.01);
    double worst = 0.0;
    for (double r : mass_balance(path)) worst = std::max(worst, std::abs(r));
    CHECK(worst <= 1e-2);
    for (std::size_t k = 1; k < path.alive_mass.size(); ++k) {
        CHECK(path.alive_mass[k] <= path.alive_mass[k - 1] + 1e-12);
        CHECK(path.exit_flux[k].flux_left >= -1e-8);
        CHECK(path.exit_flux[k].clipped_mass <= 1e-6);
    }
    // d/dt alive = -flux to within 2 dt max-flux
    const double dt = p.time_grid.dt();
    double max_flux = 0.0;
    for (const auto& f : path.exit_flux) max_flux = std::max(max_flux, f.total());
    const auto absorbed = absorbed_mass(path);
    for (std::size_t k = 50; k < path.alive_mass.size(); ++k) {
        const double lost = path.alive_mass[k - 1] - path.alive_mass[k];
        const double through = absorbed[k] - absorbed[k - 1];
        CHECK(std::abs(lost - through) <= 2.0 * dt * max_flux);
    }
}

TEST_CASE("a near-deterministic idle integrator keeps its density") {
    ProblemSpec s = make_preset("integrator").spec;
    const Grid1D g = Grid1D::with_spacing(-2.0, 2.0, 0.01);
    const auto rho0 = InitialDensity::gaussian(0.0, 0.1);
    const DensityPath path = solve_fp(s, zero_feedback(), rho0, g, TimeGrid::with_step(0.0, 1.0, 1e-3),
                                      StoppingBoundary::none());
    CHECK(std::abs(field_moments(path.frames.back()).first) <= 1e-3);
    CHECK(std::abs(path.alive_mass.back() - 1.0) <= 1e-8);
}

TEST_CASE("OU relaxation mean follows 2 exp(-t)") {
    const Preset p = make_preset("ou");
    const DensityPath path = solve_fp(p.spec, p.feedback, p.rho0, p.grid, p.time_grid, p.boundary);
    for (std::size_t k = 0; k < path.frames.size(); k += 250) {
        const double t = path.time_grid.t(k);
        const double mean = field_moments(path.frames[k]).first;
        CHECK(std::abs(mean - 2.0 * std::exp(-t)) <= 0.02 * 2.0 * std::exp(-t));
    }
    // no boundary: mass conserved up to tail leakage
    for (double r : mass_balance(path)) CHECK(std::abs(r) <= 5e-3);
    for (double m : path.alive_mass) CHECK(std::abs(m - 1.0) <= 5e-3);
}

TEST_CASE("inward drift without diffusion absorbs nothing") {
    const auto spec = drift_diffusion([](double) { return 1.0; }, 1e-6);
    const auto b = StoppingBoundary::stop_below([](double) { return 0.0; });
    const Grid1D g = Grid1D::with_spacing(0.0, 6.0, 0.01);
    const DensityPath path =
        solve_fp(spec, zero_feedback(), InitialDensity::gaussian(2.0, 0.2), g, TimeGrid::with_step(0.0, 1.0, 1e-3), b);
    for (double a : absorbed_mass(path)) CHECK(std::abs(a) <= 1e-12);
    for (double r : mass_balance(path)) CHECK(std::abs(r) <= 1e-3);
}

TEST_CASE("spatial refinement converges at second order") {
    // transient OU from N(1, 0.5^2) against the exact Gaussian marginal at t = 0.5
    const auto spec = drift_diffusion([](double x) { return -x; }, std::sqrt(2.0));
    const double t1 = 0.5, m0 = 1.0, v0 = 0.25;
    const double m = m0 * std::exp(-t1), v = v0 * std::exp(-2.0 * t1) + 1.0 - std::exp(-2.0 * t1);
    auto error_at = [&](double dx) {
        const Grid1D g = Grid1D::with_spacing(-8.0, 8.0, dx);
        const auto rho0 = InitialDensity::gaussian(m0, std::sqrt(v0));
        const DensityPath path = solve_fp(spec, zero_feedback(), rho0, g, TimeGrid::with_step(0.0, t1, 1e-5),
                                          StoppingBoundary::none());
        double e = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            e = std::max(e, std::abs(path.frames.back()[i] - normal_pdf(g.x(i), m, std::sqrt(v))));
        return e;
    };
    const double coarse = error_at(0.2), fine = error_at(0.1);
    CAPTURE(coarse);
    CAPTURE(fine);
    CHECK(coarse / fine >= 3.0);
}

TEST_CASE("initial mass must fall on the grid") {
    const auto spec = drift_diffusion([](double) { return 0.0; }, 1.0);
    const Grid1D g = Grid1D::with_spacing(-1.0, 1.0, 0.01);
    try {
        solve_fp(spec, zero_feedback(), InitialDensity::gaussian(3.0, 0.5), g, TimeGrid(0.0, 1.0, 10),
                 StoppingBoundary::none());
        FAIL("expected MassDeficit");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MassDeficit);
    }
}

TEST_CASE("blow-up is reported as divergence") {
    const auto spec = drift_diffusion([](double) { return 0.0; }, 1.0);
    const Grid1D g = Grid1D::with_spacing(-1.0, 1.0, 0.1);
    Field rho(g, 1e13);
    try {
        fp_step(rho, spec, zero_feedback(), 0.0, 1e-3, StoppingBoundary::none());
        FAIL("expected SchemeDiverged");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SchemeDiverged);
    }
}
