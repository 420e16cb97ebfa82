#include "dsteer/bench.hpp"
#include "dsteer/errors.hpp"
#include "dsteer/presets.hpp"
#include "dsteer/sde_mc.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dsteer;

namespace {

ProblemSpec frozen_spec() {
    ProblemSpec s;
    s.drift = [](double, double, double) { return 0.0; };
    s.diffusion = [](double) { return 0.0; };
    s.running_cost = [](double, double, double) { return 1.0; };
    s.terminal_cost = [](double, double) { return 0.0; };
    return s;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("paths without noise or drift stay frozen") {
    McConfig cfg;
    cfg.n_paths = 200;
    cfg.dt = 0.01;
    cfg.horizon = 1.5;
    const auto rho0 = InitialDensity::uniform(-1.0, 1.0);
    const McResult r = simulate_killed(frozen_spec(), zero_feedback(), rho0, StoppingBoundary::none(), cfg);
    const McResult again = simulate_killed(frozen_spec(), zero_feedback(), rho0, StoppingBoundary::none(), cfg);
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r.x_final[i] == again.x_final[i]);
        CHECK(r.cost[i] == doctest::Approx(1.5));
        CHECK(r.alive[i]);
    }
    CHECK(r.survival() == 1.0);
}

TEST_CASE("killed Brownian motion survives per the reflection principle") {
    const Preset p = make_preset("bm_absorb");
    McConfig cfg;
    cfg.n_paths = 100000;
    cfg.dt = 1e-3;
    cfg.horizon = 1.0;
    cfg.jobs = 2;
    const McResult r = simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, cfg);
    CHECK(std::abs(r.survival() - std::erf(1.0 / std::sqrt(2.0))) <= 0.01);
    for (std::size_t i = 0; i < r.size(); ++i)
        if (!r.alive[i]) CHECK(r.stop_time[i] <= 1.0);
}

TEST_CASE("OU relaxation mean from Euler-Maruyama") {
    const Preset p = make_preset("ou");
    McConfig cfg;
    cfg.n_paths = 100000;
    cfg.dt = 1e-3;
    cfg.horizon = 1.0;
    cfg.jobs = 2;
    const McResult r = simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, cfg);
    CHECK(std::abs(mean_of(r.x_final) - 2.0 * std::exp(-1.0)) <= 0.02);
}

TEST_CASE("cost estimates") {
    McResult same;
    same.cost = {2.5, 2.5, 2.5, 2.5};
    const CostEstimate e = estimate_cost(same);
    CHECK(e.mean == 2.5);
    CHECK(e.standard_error == 0.0);

    McConfig cfg;
    cfg.n_paths = 500;
    cfg.dt = 0.01;
    cfg.horizon = 0.8;
    ProblemSpec s = frozen_spec();
    s.diffusion = [](double) { return 1.0; };
    const McResult r = simulate_killed(s, zero_feedback(), InitialDensity::gaussian(0.0, 1.0), StoppingBoundary::none(), cfg);
    const CostEstimate c = estimate_cost(r);
    CHECK(std::abs(c.mean - 0.8) <= 3.0 * c.standard_error + 1e-9);
}

TEST_CASE("LQ cost under the Riccati feedback matches the Riccati value") {
    const Preset p = make_preset("lq_steer");
    const RiccatiOracle ric = lq_riccati_oracle(0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 0.5);
    const Feedback u = [&](double t, double x) { return ric.feedback(t, x); };
    McConfig cfg;
    cfg.n_paths = 40000;
    cfg.dt = 1e-3;
    cfg.horizon = 1.0;
    cfg.jobs = 2;
    const McResult r = simulate_killed(p.spec, u, p.rho0, p.boundary, cfg);
    const CostEstimate c = estimate_cost(r);
    // E[V(0, x0)] for x0 ~ N(0.5, 0.3^2)
    const double m = 0.5, v = 0.09;
    const double oracle = 0.5 * ric.P(0.0) * (m * m + v) + (ric.value(0.0, 0.0));
    CHECK(std::abs(c.mean - oracle) <= 3.0 * c.standard_error + 0.02 * std::abs(oracle));
}

TEST_CASE("Wasserstein-1 between samples") {
    const std::vector<double> a{0.1, -0.3, 2.0, 1.2};
    CHECK(wasserstein1(a, a) == 0.0);
    const std::vector<double> zero{0.0}, d{1.75};
    CHECK(wasserstein1(zero, d) == doctest::Approx(1.75));

    std::mt19937_64 rng(9);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<double> x(200000), y(200000);
    for (double& v : x) v = N(rng);
    for (double& v : y) v = N(rng) + 0.5;
    CHECK(std::abs(wasserstein1(x, y) - 0.5) <= 0.02);

    const std::vector<double> empty;
    try {
        wasserstein1(empty, a);
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyInput);
    }
}

TEST_CASE("Wasserstein-1 against a grid density") {
    const Grid1D g = Grid1D::with_spacing(-3.0, 5.0, 0.001);
    const Field box = Field::sample(g, [](double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; });
    // point mass at 2 versus uniform(0, 1): distance 1.5
    const std::vector<double> point{2.0};
    CHECK(std::abs(wasserstein1(point, box) - 1.5) <= 2e-3);
    const Field shifted = Field::sample(g, [](double x) { return (x >= 0.5 && x <= 1.5) ? 1.0 : 0.0; });
    CHECK(std::abs(wasserstein1(box, shifted) - 0.5) <= 2e-3);
}

TEST_CASE("identical configurations are bit-identical for any worker count") {
    const Preset p = make_preset("bm_absorb");
    McConfig cfg;
    cfg.n_paths = 3000;
    cfg.dt = 1e-3;
    cfg.seed = 42;
    cfg.snapshot_times = {0.5};
    cfg.jobs = 1;
    const McResult a = simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, cfg);
    cfg.jobs = 4;
    const McResult b = simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, cfg);
    CHECK(a.x_final == b.x_final);
    CHECK(a.stop_time == b.stop_time);
    CHECK(a.alive == b.alive);
    CHECK(a.cost == b.cost);
    CHECK(a.snapshots.front().positions == b.snapshots.front().positions);
    cfg.seed = 43;
    const McResult c = simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, cfg);
    CHECK(a.x_final != c.x_final);
}

TEST_CASE("survival estimates across seeds spread binomially") {
    const Preset p = make_preset("bm_absorb");
    McConfig cfg;
    cfg.n_paths = 10000;
    cfg.dt = 1e-2;
    std::vector<double> est;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.seed = seed;
        est.push_back(simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, cfg).survival());
    }
    const double pbar = mean_of(est);
    const double se = std::sqrt(pbar * (1.0 - pbar) / static_cast<double>(cfg.n_paths));
    for (double e : est) CHECK(std::abs(e - pbar) <= 4.0 * se);
}
