#include "dsteer/errors.hpp"
#include "dsteer/presets.hpp"
#include "dsteer/sde_mc.hpp"
#include "dsteer/transform.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace dsteer;

namespace {

double normal_pdf(double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

Field gaussian_frame(const Grid1D& g, double m, double s) {
    return Field::sample(g, [=](double x) { return normal_pdf(x, m, s); });
}

ProblemSpec spec_with(std::function<double(double, double)> f, double sigma) {
    ProblemSpec s;
    s.drift = [f](double, double x, double u) { return f(x, u); };
    s.diffusion = [sigma](double) { return sigma; };
    s.running_cost = [](double, double, double) { return 0.0; };
    s.terminal_cost = [](double, double) { return 0.0; };
    return s;
}

/// Time-independent velocity c(x) tabulated on every frame.
VelocityField tabulated_velocity(const Grid1D& g, const TimeGrid& tg, const std::function<double(double)>& c) {
    VelocityField v;
    v.grid = g;
    v.time_grid = tg;
    std::vector<double> frame(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) frame[i] = c(g.x(i));
    v.frames.assign(tg.steps() + 1, frame);
    return v;
}

double max_valid_error(const ScoreField& s, const std::function<double(double)>& exact, double lo, double hi,
                       bool relative = false) {
    double e = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double x = s.grid.x(i);
        if (!s.valid[i] || x < lo || x > hi) continue;
        const double d = std::abs(s.values[i] - exact(x));
        e = std::max(e, relative ? d / std::max(std::abs(exact(x)), 1.0) : d);
    }
    return e;
}

}  // namespace

TEST_CASE("score of a standard normal is -x") {
    const Grid1D g = Grid1D::with_spacing(-8.0, 8.0, 0.01);
    const Field rho = gaussian_frame(g, 0.0, 1.0);
    const ScoreField s = score_field(rho, default_score_floor(rho), 0.0, StoppingBoundary::none(), 0.0);
    CHECK(max_valid_error(s, [](double x) { return -x; }, -3.0, 3.0) <= 1e-2);
}

TEST_CASE("score of a shifted normal") {
    const double m = 1.5, sd = 0.7;
    const Grid1D g = Grid1D::with_spacing(-6.0, 8.0, 0.01);
    const Field rho = gaussian_frame(g, m, sd);
    const ScoreField s = score_field(rho, default_score_floor(rho), 0.0, StoppingBoundary::none(), 0.0);
    CHECK(max_valid_error(s, [=](double x) { return (m - x) / (sd * sd); }, m - 2 * sd, m + 2 * sd, true) <= 1e-2);
}

TEST_CASE("score of a uniform frame vanishes") {
    const Grid1D g(0.0, 1.0, 101);
    const ScoreField s = score_field(Field(g, 1.0), 1e-10, 0.0, StoppingBoundary::none(), 0.0);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) CHECK(std::abs(s.values[i]) <= 1e-6);
}

TEST_CASE("score masking near absorbing nodes and below the floor") {
    const Grid1D g = Grid1D::with_spacing(0.0, 4.0, 0.01);
    const auto b = StoppingBoundary::stop_below([](double) { return 0.0; });
    const Field rho = Field::sample(g, [](double x) { return x * std::exp(-x * x); });
    const ScoreField s = score_field(rho, default_score_floor(rho), 3.0 * g.dx(), b, 0.0);
    for (std::size_t i = 0; i <= 3; ++i) CHECK_FALSE(s.valid[i]);
    CHECK(s.valid[10]);
    CHECK(s.values[0] == s.values[4]);  // constant extrapolation from the nearest valid node
    try {
        score_field(Field(g, 0.0), 1e-10, 0.0, StoppingBoundary::none(), 0.0);
        FAIL("expected AllMasked");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::AllMasked);
    }
}

TEST_CASE("transformed drift examples") {
    const Grid1D g = Grid1D::with_spacing(-8.0, 8.0, 0.01);
    auto window = [](const ScoreField& s, const Field& f, double half) {
        double e = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (s.valid[i] && std::abs(f.grid.x(i)) <= half) e = std::max(e, std::abs(f[i]));
        return e;
    };
    const Field std_normal = gaussian_frame(g, 0.0, 1.0);
    const ScoreField s1 = score_field(std_normal, default_score_floor(std_normal), 0.0, StoppingBoundary::none(), 0.0);

    // stationary OU: probability flow vanishes
    const ProblemSpec ou = spec_with([](double x, double) { return -x; }, std::sqrt(2.0));
    CHECK(window(s1, transformed_drift(ou, zero_feedback(), s1, 0.0), 4.0) <= 2e-2);

    // zero drift, N(0, s^2): f_tilde = D x / s^2
    const double sd = 0.8, D = 0.5;
    const Field wide = gaussian_frame(g, 0.0, sd);
    const ScoreField s2 = score_field(wide, default_score_floor(wide), 0.0, StoppingBoundary::none(), 0.0);
    const Field ft = transformed_drift(spec_with([](double, double) { return 0.0; }, 1.0), zero_feedback(), s2, 0.0);
    Field diff(g);
    for (std::size_t i = 0; i < g.size(); ++i) diff[i] = ft[i] - D * g.x(i) / (sd * sd);
    CHECK(window(s2, diff, 2.0 * sd) <= 1e-2);

    // f = u with u = -x
    const ProblemSpec integ = spec_with([](double, double u) { return u; }, std::sqrt(2.0));
    const Feedback u = [](double, double x) { return -x; };
    CHECK(window(s1, transformed_drift(integ, u, s1, 0.0), 4.0) <= 2e-2);
}

TEST_CASE("stationary flow vanishes for any linear restoring drift") {
    const Grid1D g = Grid1D::with_spacing(-10.0, 10.0, 0.01);
    const double sigma = 1.2;
    for (double kappa : {0.5, 1.0, 3.0}) {
        const double sd = sigma / std::sqrt(2.0 * kappa);
        const Field rho = gaussian_frame(g, 0.0, sd);
        const ScoreField s = score_field(rho, default_score_floor(rho), 0.0, StoppingBoundary::none(), 0.0);
        const Field ft = transformed_drift(spec_with([=](double x, double) { return -kappa * x; }, sigma),
                                           zero_feedback(), s, 0.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (s.valid[i]) worst = std::max(worst, std::abs(ft[i]));
        CAPTURE(kappa);
        CHECK(worst <= 3e-2);
    }
}

TEST_CASE("advection under zero and constant velocity") {
    const Grid1D g(-5.0, 5.0, 101);
    const TimeGrid tg(0.0, 1.0, 10);
    auto e = ParticleEnsemble::from_positions({-1.0, 0.0, 0.25, 2.0});
    advect_particles(e, tabulated_velocity(g, tg, [](double) { return 0.0; }), StopRule{}, 0.0, 1.0, 0.1);
    CHECK(e.positions == e.initial);

    const double c = 0.7;
    auto f = ParticleEnsemble::from_positions({-1.0, 0.0, 0.25, 2.0});
    advect_particles(f, tabulated_velocity(g, tg, [=](double) { return c; }), StopRule{}, 0.0, 1.0, 0.1);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(f.positions[i] - (f.initial[i] + c)) <= 1e-9);
}

TEST_CASE("characteristics stop on the boundary and at assigned times") {
    const Grid1D g(-5.0, 5.0, 101);
    const TimeGrid tg(0.0, 1.0, 10);
    const auto vel = tabulated_velocity(g, tg, [](double) { return -1.0; });
    auto e = ParticleEnsemble::from_positions({0.5, 2.0});
    StopRule rule{StoppingBoundary::stop_below([](double) { return 0.0; }), std::nullopt};
    advect_particles(e, vel, rule, 0.0, 1.0, 0.1);
    CHECK_FALSE(e.alive[0]);
    CHECK(e.stop_time[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(e.alive[1]);
    CHECK(e.stop_time[1] == ParticleEnsemble::kUnstopped);

    auto h = ParticleEnsemble::from_positions({0.0, 1.0});
    StopRule timed{StoppingBoundary::none(), TimeAssignment::per_initial([](double x0) { return 0.25 + 0.5 * x0; })};
    advect_particles(h, vel, timed, 0.0, 1.0, 0.1);
    CHECK(h.stop_time[0] == doctest::Approx(0.25));
    CHECK(h.positions[0] == doctest::Approx(-0.25));
    CHECK(h.positions[1] == doctest::Approx(0.25));
}

TEST_CASE("RK4 characteristics converge at fourth order") {
    // x' = -x is reproduced exactly by linear interpolation, so only the integrator errs
    const Grid1D g(-5.0, 5.0, 11);
    const TimeGrid tg(0.0, 2.0, 1);
    const auto vel = tabulated_velocity(g, tg, [](double x) { return -x; });
    auto run = [&](double dt) {
        auto e = ParticleEnsemble::from_positions({1.0, -2.0, 3.0});
        advect_particles(e, vel, StopRule{}, 0.0, 2.0, dt);
        return e.positions;
    };
    const auto a = run(0.4), b = run(0.2), c = run(0.1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ratio = std::abs(a[i] - b[i]) / std::abs(b[i] - c[i]);
        CHECK(ratio >= 8.0);
        CHECK(ratio <= 24.0);
    }
}

TEST_CASE("OU characteristics relax the mean like the SDE") {
    const Preset p = make_preset("ou");
    const TimeGrid tg = TimeGrid::with_step(0.0, 1.0, 1e-3);
    const DensityPath path = solve_fp(p.spec, p.feedback, p.rho0, p.grid, tg, p.boundary);
    const VelocityField vel = build_velocity_field(p.spec, p.feedback, path, p.boundary);
    auto e = ParticleEnsemble::from_quantiles(p.rho0, 4000);
    advect_particles(e, vel, StopRule{}, 0.0, 1.0, 1e-3);
    double mean = 0.0;
    for (double x : e.positions) mean += x;
    mean /= static_cast<double>(e.size());
    CHECK(std::abs(mean - 2.0 * std::exp(-1.0)) <= 0.02 * 2.0 * std::exp(-1.0));
    CHECK(vel.kinetic_budget > 0.0);
    CHECK(std::isfinite(vel.kinetic_budget));
}

TEST_CASE("push-forward density bookkeeping") {
    const Grid1D g = Grid1D::with_spacing(-6.0, 6.0, 0.01);
    auto spike = ParticleEnsemble::from_positions(std::vector<double>(500, 0.0));
    CHECK(std::abs(trapezoid(pushforward_density(spike, g)) - 1.0) <= 1e-3);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<double> xs(100000);
    for (double& x : xs) x = N(rng);
    auto e = ParticleEnsemble::from_positions(xs);
    const Field kde = pushforward_density(e, g);
    CHECK(wasserstein1(kde, gaussian_frame(g, 0.0, 1.0)) <= 0.02);

    for (std::size_t i = 0; i < e.size(); i += 2) e.alive[i] = 0;
    CHECK(std::abs(trapezoid(pushforward_density(e, g)) - 0.5) <= 1e-2);

    auto few = ParticleEnsemble::from_positions(std::vector<double>(50, 0.0));
    try {
        pushforward_density(few, g);
        FAIL("expected TooFewParticles");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::TooFewParticles);
    }
}

TEST_CASE("Ito recovery with the identity map") {
    const Preset p = make_preset("ou");
    ItoRecoveryConfig cfg;
    cfg.x_grid = Grid1D::with_spacing(-6.0, 8.0, 0.01);
    cfg.time_grid = TimeGrid::with_step(0.0, 0.5, 1e-3);
    cfg.particles = 20000;
    const MonotoneMap id{[](double x) { return x; }, [](double) { return 1.0; }, [](double) { return 0.0; }};
    CHECK(ito_recovery_residual(p.spec, p.feedback, p.rho0, id, cfg) <= 0.02);

    const MonotoneMap square{[](double x) { return x * x; }, [](double x) { return 2.0 * x; }, [](double) { return 2.0; }};
    try {
        ito_recovery_residual(p.spec, p.feedback, p.rho0, square, cfg);
        FAIL("expected NotMonotone");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::NotMonotone);
    }
}
