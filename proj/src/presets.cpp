#include "dsteer/presets.hpp"

#include "dsteer/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dsteer {

namespace {

/// f = a(t, x) + u, L = l(t, x) + u^2 / 2, Phi = phi(t, x), constant sigma.
ProblemSpec controlled_quadratic(std::string name, std::function<double(double, double)> a,
                                 std::function<double(double, double)> a_x, double sigma, double q, double qf) {
    ProblemSpec s;
    s.name = std::move(name);
    s.drift = [a](double t, double x, double u) { return a(t, x) + u; };
    s.drift_dx = [a_x](double t, double x, double) { return a_x(t, x); };
    s.drift_du = [](double, double, double) { return 1.0; };
    s.diffusion = [sigma](double) { return sigma; };
    s.running_cost = [q](double, double x, double u) { return 0.5 * (q * x * x + u * u); };
    s.running_cost_dx = [q](double, double x, double) { return q * x; };
    s.running_cost_du = [](double, double, double u) { return u; };
    s.terminal_cost = [qf](double, double x) { return 0.5 * qf * x * x; };
    s.terminal_cost_dx = [qf](double, double x) { return qf * x; };
    s.terminal_cost_dt = [](double, double) { return 0.0; };
    s.affine_quadratic = ControlAffineQuadratic{[](double, double) { return 1.0; }, [](double, double) { return 1.0; }};
    return s;
}

void freeze_control(ProblemSpec& s) {
    s.control_min = 0.0;
    s.control_max = 0.0;
    s.affine_quadratic.reset();
}

Preset ou() {
    Preset p;
    p.name = "ou";
    p.spec = controlled_quadratic(
        "ou", [](double, double x) { return -x; }, [](double, double) { return -1.0; }, std::sqrt(2.0), 1.0, 1.0);
    p.rho0 = InitialDensity::gaussian(2.0, 0.5);
    p.grid = Grid1D::with_spacing(-8.0, 8.0, 0.01);
    p.time_grid = TimeGrid::with_step(0.0, 2.0, 1e-3);
    p.feedback = zero_feedback();
    p.notes = "dx = -x dt + sqrt(2) dw, x0 ~ N(2, 0.25); stationary law N(0, 1)";
    return p;
}

Preset ou_cost() {
    Preset p;
    p.name = "ou_cost";
    p.spec = controlled_quadratic(
        "ou_cost", [](double, double x) { return -x; }, [](double, double) { return -1.0; }, 1.0, 1.0, 1.0);
    p.rho0 = InitialDensity::gaussian(1.0, 0.5);
    p.grid = Grid1D::with_spacing(-6.0, 6.0, 0.01);
    p.time_grid = TimeGrid::with_step(0.0, 1.0, 1e-3);
    p.feedback = zero_feedback();
    p.notes = "dx = (-x + u) dt + dw, L = (x^2 + u^2)/2, Phi = x^2/2, T = 1, no spatial stopping";
    return p;
}

Preset integrator() {
    Preset p;
    p.name = "integrator";
    p.spec = controlled_quadratic(
        "integrator", [](double, double) { return 0.0; }, [](double, double) { return 0.0; }, 1e-6, 0.0, 0.0);
    p.rho0 = InitialDensity::gaussian(0.0, 0.5);
    p.grid = Grid1D::with_spacing(-4.0, 6.0, 0.01);
    p.time_grid = TimeGrid::with_step(0.0, 1.0, 1e-3);
    p.feedback = [](double, double) { return 1.0; };
    p.notes = "dx = u dt with u = 1 and sigma = 1e-6: a rigid translation";
    return p;
}

Preset bm_absorb() {
    Preset p;
    p.name = "bm_absorb";
    p.spec = controlled_quadratic(
        "bm_absorb", [](double, double) { return 0.0; }, [](double, double) { return 0.0; }, 1.0, 0.0, 0.0);
    freeze_control(p.spec);
    p.rho0 = InitialDensity::gaussian(1.0, 0.02);
    p.boundary = StoppingBoundary::stop_below([](double) { return 0.0; });
    p.grid = Grid1D::with_spacing(0.0, 8.0, 0.005);
    p.time_grid = TimeGrid::with_step(0.0, 1.0, 1e-3);
    p.feedback = zero_feedback();
    p.notes = "standard Brownian motion from x0 ~ N(1, 0.02^2), absorbed at 0";
    return p;
}

Preset american_put_log() {
    constexpr double r = 0.05, sigma = 0.4, strike = 1.0;
    Preset p;
    p.name = "american_put_log";
    ProblemSpec& s = p.spec;
    s.name = p.name;
    s.drift = [](double, double, double) { return r - 0.5 * sigma * sigma; };
    s.drift_dx = [](double, double, double) { return 0.0; };
    s.drift_du = [](double, double, double) { return 0.0; };
    s.diffusion = [](double) { return sigma; };
    s.running_cost = [](double, double, double) { return 0.0; };
    s.running_cost_dx = [](double, double, double) { return 0.0; };
    s.running_cost_du = [](double, double, double) { return 0.0; };
    s.terminal_cost = [](double, double x) { return -std::max(strike - std::exp(x), 0.0); };
    s.terminal_cost_dx = [](double, double x) { return std::exp(x) < strike ? std::exp(x) : 0.0; };
    s.terminal_cost_dt = [](double, double) { return 0.0; };
    s.discount = r;
    freeze_control(s);
    p.rho0 = InitialDensity::gaussian(0.0, 0.1);
    p.grid = Grid1D::with_spacing(std::log(0.01), std::log(200.0), 0.01);
    p.time_grid = TimeGrid(0.0, 1.0, 1);
    p.feedback = zero_feedback();
    p.notes = "log-price of a perpetual American put, r = 0.05, sigma = 0.4, K = 1; cost is minus the payoff";
    return p;
}

Preset brownian_bridge() {
    Preset p;
    p.name = "brownian_bridge";
    ProblemSpec& s = p.spec;
    s.name = p.name;
    s.drift = [](double t, double x, double) { return -x / (1.0 - t); };
    s.drift_dx = [](double t, double, double) { return -1.0 / (1.0 - t); };
    s.drift_du = [](double, double, double) { return 0.0; };
    s.diffusion = [](double) { return 1.0; };
    s.running_cost = [](double, double, double) { return 0.0; };
    s.running_cost_dx = [](double, double, double) { return 0.0; };
    s.running_cost_du = [](double, double, double) { return 0.0; };
    s.terminal_cost = [](double, double x) { return -x; };
    s.terminal_cost_dx = [](double, double) { return -1.0; };
    s.terminal_cost_dt = [](double, double) { return 0.0; };
    freeze_control(s);
    p.rho0 = InitialDensity::gaussian(0.0, 0.05);
    p.boundary = StoppingBoundary::stop_above([](double t) { return kBridgeBoundaryScale * std::sqrt(1.0 - t); });
    p.grid = Grid1D::with_spacing(-3.0, 1.5, 0.0025);
    p.time_grid = TimeGrid::with_step(0.0, 0.995, 5e-5);
    p.feedback = zero_feedback();
    p.notes = "Brownian bridge pinned at 0 at t = 1, stop to collect x; forced stop at the horizon 0.995";
    return p;
}

Preset lq_steer(bool with_mean) {
    Preset p;
    p.name = with_mean ? "lq_steer_mean" : "lq_steer";
    p.spec = controlled_quadratic(
        p.name, [](double, double) { return 0.0; }, [](double, double) { return 0.0; }, 0.5, 1.0, 2.0);
    if (with_mean) {
        p.spec.constraint = [](double, double x) { return x - 1.0; };
        p.spec.constraint_dx = [](double, double) { return 1.0; };
        p.spec.constraint_dt = [](double, double) { return 0.0; };
    }
    p.rho0 = InitialDensity::gaussian(0.5, 0.3);
    p.grid = Grid1D::with_spacing(-5.0, 5.0, 0.01);
    p.time_grid = TimeGrid::with_step(0.0, 1.0, 1e-3);
    p.feedback = zero_feedback();
    p.notes = with_mean ? "dx = u dt + 0.5 dw, L = (x^2 + u^2)/2, Phi = x^2, E[x_1] = 1"
                        : "dx = u dt + 0.5 dw, L = (x^2 + u^2)/2, Phi = x^2";
    return p;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"ou", "ou_cost", "integrator", "bm_absorb", "american_put_log", "brownian_bridge", "lq_steer",
            "lq_steer_mean"};
}

Preset make_preset(const std::string& name) {
    if (name == "ou") return ou();
    if (name == "ou_cost") return ou_cost();
    if (name == "integrator") return integrator();
    if (name == "bm_absorb") return bm_absorb();
    if (name == "american_put_log") return american_put_log();
    if (name == "brownian_bridge") return brownian_bridge();
    if (name == "lq_steer") return lq_steer(false);
    if (name == "lq_steer_mean") return lq_steer(true);
    throw Error(ErrorKind::UnknownPreset, "unknown preset '" + name + "'");
}

}  // namespace dsteer
