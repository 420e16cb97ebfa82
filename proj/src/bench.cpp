#include "dsteer/bench.hpp"

#include "dsteer/errors.hpp"
#include "dsteer/fokker_planck.hpp"
#include "dsteer/optimality.hpp"
#include "dsteer/sde_mc.hpp"
#include "dsteer/transform.hpp"
#include "dsteer/value_hjb.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace dsteer {

double PutOracle::value(double s) const {
    if (s <= boundary) return strike - s;
    return (strike - boundary) * std::pow(s / boundary, -gamma);
}

double PutOracle::derivative(double s) const {
    if (s <= boundary) return -1.0;
    return -gamma * (strike - boundary) * std::pow(s / boundary, -gamma) / s;
}

double american_put_boundary_closed_form(double r, double sigma, double strike) {
    return 2.0 * r * strike / (2.0 * r + sigma * sigma);
}

PutOracle american_put_oracle(double r, double sigma, double strike) {
    if (!(r > 0.0 && sigma > 0.0 && strike > 0.0))
        throw Error(ErrorKind::InvalidArgument, "put oracle needs r, sigma, K > 0");
    PutOracle o;
    o.rate = r;
    o.sigma = sigma;
    o.strike = strike;
    o.gamma = 2.0 * r / (sigma * sigma);
    // V = A S^-gamma on the continuation side; value matching fixes A, smooth pasting fixes b
    const double gamma = o.gamma;
    o.boundary = find_root([&](double b) { return gamma * (strike - b) / b - 1.0; }, 1e-9 * strike, strike);
    return o;
}

double brownian_bridge_oracle() {
    auto phi = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
    auto eq = [&](double b) {
        return (1.0 - b * b) * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * b * b) * phi(b) - b;
    };
    return find_root(eq, 0.5, 1.0, 1e-14);
}

double RiccatiOracle::P(double t) const {
    const double s = std::clamp(t / dt, 0.0, static_cast<double>(p.size() - 1));
    auto k = static_cast<std::size_t>(s);
    if (k + 1 >= p.size()) return p.back();
    const double w = s - static_cast<double>(k);
    return p[k] + w * (p[k + 1] - p[k]);
}

double RiccatiOracle::value(double t, double x) const {
    const double s = std::clamp(t / dt, 0.0, static_cast<double>(offset.size() - 1));
    auto k = static_cast<std::size_t>(s);
    double c = offset.back();
    if (k + 1 < offset.size()) c = offset[k] + (s - static_cast<double>(k)) * (offset[k + 1] - offset[k]);
    return 0.5 * P(t) * x * x + c;
}

RiccatiOracle lq_riccati_oracle(double a, double b, double q, double r, double qf, double horizon, double sigma) {
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "Riccati oracle needs R > 0");
    RiccatiOracle o;
    o.a = a;
    o.b = b;
    o.q = q;
    o.r = r;
    o.qf = qf;
    o.horizon = horizon;
    o.sigma = sigma;
    const auto steps = static_cast<std::size_t>(std::llround(horizon / 1e-4));
    o.dt = horizon / static_cast<double>(steps);
    o.p.assign(steps + 1, 0.0);
    o.offset.assign(steps + 1, 0.0);
    // state (P, c) integrated backward in t
    auto rhs = [&](double pv) {
        return std::pair<double, double>{-2.0 * a * pv + b * b * pv * pv / r - q, -0.5 * sigma * sigma * pv};
    };
    double pv = qf, cv = 0.0;
    o.p[steps] = pv;
    const double h = -o.dt;
    for (std::size_t k = steps; k-- > 0;) {
        const auto [k1p, k1c] = rhs(pv);
        const auto [k2p, k2c] = rhs(pv + 0.5 * h * k1p);
        const auto [k3p, k3c] = rhs(pv + 0.5 * h * k2p);
        const auto [k4p, k4c] = rhs(pv + h * k3p);
        pv += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        cv += h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        o.p[k] = pv;
        o.offset[k] = cv;
    }
    return o;
}

MeanConstraintOracle lq_mean_constraint_oracle(double a, double b, double q, double r, double qf, double horizon,
                                               double mean0, double target) {
    const RiccatiOracle ric = lq_riccati_oracle(a, b, q, r, qf, horizon);
    const std::size_t steps = ric.p.size() - 1;
    const double dt = ric.dt;
    // beta' = (B^2 P / R - A) beta backward from -eta; then the mean forward
    auto shoot = [&](double eta, double* beta0) {
        std::vector<double> beta(steps + 1);
        beta[steps] = -eta;
        for (std::size_t k = steps; k-- > 0;) {
            const double t1 = static_cast<double>(k + 1) * dt;
            auto f = [&](double t, double bv) { return (b * b * ric.P(t) / r - a) * bv; };
            const double h = -dt;
            const double bv = beta[k + 1];
            const double k1 = f(t1, bv);
            const double k2 = f(t1 + 0.5 * h, bv + 0.5 * h * k1);
            const double k3 = f(t1 + 0.5 * h, bv + 0.5 * h * k2);
            const double k4 = f(t1 + h, bv + h * k3);
            beta[k] = bv + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (beta0) *beta0 = beta[0];
        auto beta_at = [&](double t) {
            const double s = std::clamp(t / dt, 0.0, static_cast<double>(steps));
            auto k = static_cast<std::size_t>(s);
            if (k >= steps) return beta[steps];
            return beta[k] + (s - static_cast<double>(k)) * (beta[k + 1] - beta[k]);
        };
        auto g = [&](double t, double m) { return a * m - b * b * (ric.P(t) * m + beta_at(t)) / r; };
        double m = mean0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double t = static_cast<double>(k) * dt;
            const double k1 = g(t, m);
            const double k2 = g(t + 0.5 * dt, m + 0.5 * dt * k1);
            const double k3 = g(t + 0.5 * dt, m + 0.5 * dt * k2);
            const double k4 = g(t + dt, m + dt * k3);
            m += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        return m;
    };
    // the terminal mean is affine in eta
    const double m0 = shoot(0.0, nullptr);
    const double m1 = shoot(1.0, nullptr);
    MeanConstraintOracle o;
    o.eta = (target - m0) / (m1 - m0);
    o.mean_at_horizon = shoot(o.eta, &o.beta0);
    return o;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(8) << v;
    return os.str();
}

std::vector<CheckReport> bench_put(const BenchConfig& cfg) {
    constexpr double r = 0.05, sigma = 0.4, strike = 1.0;
    std::vector<CheckReport> out;
    const PutOracle oracle = american_put_oracle(r, sigma, strike);
    const double b_closed = american_put_boundary_closed_form(r, sigma, strike);
    out.push_back(CheckReport::make("oracle_root_vs_closed_form", oracle.boundary - b_closed, 1e-10));
    out.push_back(CheckReport::make("oracle_value_matching", oracle.value(oracle.boundary) - (strike - oracle.boundary),
                                    1e-12));
    const double h = 1e-6 * oracle.boundary;
    const double right_slope = (oracle.value(oracle.boundary + h) - oracle.value(oracle.boundary)) / h;
    out.push_back(CheckReport::make("oracle_smooth_pasting", right_slope + 1.0, 1e-5));

    const Preset p = make_preset("american_put_log");
    ViOptions vi;
    vi.stationary = true;
    vi.omega = 1.9;
    vi.ends = ViEnds::Linear;
    const ValueField v = solve_obstacle_vi(p.spec, p.spec.terminal_cost, p.grid, vi);
    const auto edge = v.free_boundary.front();
    const double b_num = edge ? std::exp(*edge) : 0.0;
    out.push_back(CheckReport::make("free_boundary_rel_error", b_num / oracle.boundary - 1.0, 0.01 * cfg.tol_scale,
                                    "b=" + fmt(b_num) + " b*=" + fmt(oracle.boundary)));
    double sup = 0.0;
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
        const double s = std::exp(p.grid.x(i));
        if (s > 20.0) break;
        sup = std::max(sup, std::abs(-v.frames.front().values[i] - oracle.value(s)));
    }
    out.push_back(CheckReport::make("value_sup_error", sup, 1e-2 * cfg.tol_scale, "S in [0.01, 20]"));
    const auto& c = *v.complementarity;
    const double comp = std::max({0.0, -c.min_continuation, -c.min_gap, c.max_product});
    out.push_back(CheckReport::make("complementarity", comp, 1e-6 * cfg.tol_scale,
                                    "min_cont=" + fmt(c.min_continuation) + " min_gap=" + fmt(c.min_gap) +
                                        " max_prod=" + fmt(c.max_product)));
    return out;
}

std::vector<CheckReport> bench_bridge(const BenchConfig& cfg) {
    std::vector<CheckReport> out;
    const double oracle = brownian_bridge_oracle();
    out.push_back(CheckReport::make("oracle_vs_frozen_fixture", oracle - kBridgeBoundaryScale, 1e-9));
    out.push_back(CheckReport::make("oracle_in_range", oracle - 0.84, 0.04, "expected in (0.80, 0.88)"));

    const Preset p = make_preset("brownian_bridge");
    const double t_fit = 0.9;
    auto residuals = [&](double scale) {
        const auto boundary =
            StoppingBoundary::stop_above([scale](double t) { return scale * std::sqrt(std::max(1.0 - t, 0.0)); });
        const DensityPath rho = solve_fp(p.spec, p.feedback, p.rho0, p.grid, p.time_grid, boundary);
        const CostateField lam = costate_sweep(p.spec, p.feedback, rho, boundary, 0.0);
        return boundary_stopping_residuals(p.spec, p.feedback, lam, boundary, 0.0, t_fit);
    };
    const auto at_oracle = residuals(oracle);
    const auto perturbed = residuals(1.1 * oracle);
    double worst = 0.0;
    for (const auto& r : at_oracle) worst = std::max(worst, std::abs(r.residual));
    out.push_back(CheckReport::make("os5_max_on_oracle_boundary", worst, 5e-2 * cfg.tol_scale, "t in [0, 0.9]"));
    std::size_t not_larger = 0;
    double worst_pert = 0.0;
    for (std::size_t k = 0; k < std::min(at_oracle.size(), perturbed.size()); ++k) {
        if (!(std::abs(perturbed[k].residual) > std::abs(at_oracle[k].residual))) ++not_larger;
        worst_pert = std::max(worst_pert, std::abs(perturbed[k].residual));
    }
    out.push_back(CheckReport::make("perturbed_not_larger_count", static_cast<double>(not_larger), 0.0,
                                    "max at 1.1B = " + fmt(worst_pert)));

    SweepTargets targets;
    targets.mode = StoppingMode::BoundaryTemplate;
    targets.shape = [](double t) { return std::sqrt(std::max(1.0 - t, 0.0)); };
    targets.stop_above = true;
    targets.scale_guess = 1.0;
    targets.fit_until = t_fit;
    SweepConfig sc;
    sc.jobs = cfg.jobs;
    const SweepState st = fb_sweep(p.spec, p.rho0, p.grid, p.time_grid, targets, sc);
    const double fitted = st.boundary_scale.value_or(0.0);
    out.push_back(CheckReport::make("fitted_scale_rel_error", fitted / oracle - 1.0, 0.02 * cfg.tol_scale,
                                    "fitted=" + fmt(fitted) + " B=" + fmt(oracle)));
    return out;
}

/// sup over |x| <= 2 and the given times of |num - ref|, relative to the largest |ref|.
template <class Num, class Ref>
double relative_sup(Num&& num, Ref&& ref, std::initializer_list<double> times) {
    double err = 0.0, scale = 0.0;
    for (double t : times)
        for (int j = -40; j <= 40; ++j) {
            const double x = 0.05 * j;
            err = std::max(err, std::abs(num(t, x) - ref(t, x)));
            scale = std::max(scale, std::abs(ref(t, x)));
        }
    return err / scale;
}

std::vector<CheckReport> bench_lq(const BenchConfig& cfg) {
    std::vector<CheckReport> out;
    const Preset p = make_preset("lq_steer");
    // P' = P^2 - 1, P(1) = 2 has the closed form coth(1 + atanh(1/2) - t)
    const RiccatiOracle ric = lq_riccati_oracle(0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 0.5);
    const double c = 1.0 + std::atanh(0.5);
    double closed = 0.0;
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) closed = std::max(closed, std::abs(ric.P(t) - 1.0 / std::tanh(c - t)));
    out.push_back(CheckReport::make("riccati_vs_closed_form", closed, 1e-9));

    SweepConfig sc;
    sc.jobs = cfg.jobs;
    const SweepState st = fb_sweep(p.spec, p.rho0, p.grid, p.time_grid, SweepTargets{}, sc);
    const auto& last = st.last();
    out.push_back(CheckReport::make("sweep_converged", st.converged ? 0.0 : 1.0, 0.0));
    out.push_back(CheckReport::make("sweep_iterations", static_cast<double>(st.history.size()), 50.0));
    out.push_back(CheckReport::make("os1", last.os1, 1e-3 * cfg.tol_scale));
    out.push_back(CheckReport::make("os2_defect", last.os2, 1e-3 * cfg.tol_scale));
    out.push_back(CheckReport::make("os4", last.os4, 1e-3 * cfg.tol_scale));
    const Feedback fb = st.feedback();
    out.push_back(CheckReport::make(
        "feedback_rel_error",
        relative_sup([&](double t, double x) { return fb(t, x); }, [&](double t, double x) { return ric.feedback(t, x); },
                     {0.0, 0.25, 0.5, 0.75, 0.95}),
        1e-2 * cfg.tol_scale, "|x| <= 2"));
    out.push_back(CheckReport::make(
        "costate_rel_error",
        relative_sup([&](double t, double x) { return interp_linear(st.costate.frame_at(t), x).value; },
                     [&](double t, double x) { return ric.costate(t, x); }, {0.0, 0.5, 0.9}),
        1e-2 * cfg.tol_scale, "|x| <= 2"));

    const Preset pm = make_preset("lq_steer_mean");
    const auto mean0 = *pm.rho0.mean;
    const MeanConstraintOracle mo = lq_mean_constraint_oracle(0.0, 1.0, 1.0, 1.0, 2.0, 1.0, mean0, 1.0);
    const SweepState sm = fb_sweep(pm.spec, pm.rho0, pm.grid, pm.time_grid, SweepTargets{}, sc);
    const Field& final_rho = sm.density.frames.back();
    const double achieved = field_moments(final_rho).first;
    out.push_back(CheckReport::make("constrained_mean_error", achieved - 1.0, 1e-2 * cfg.tol_scale,
                                    "E[x_T]=" + fmt(achieved)));
    out.push_back(CheckReport::make("constrained_converged", sm.converged ? 0.0 : 1.0, 0.0));
    out.push_back(CheckReport::make("eta_rel_error", (sm.eta - mo.eta) / mo.eta, 1e-2 * cfg.tol_scale,
                                    "eta=" + fmt(sm.eta) + " oracle=" + fmt(mo.eta)));
    return out;
}

std::vector<CheckReport> check_stein(const BenchConfig& cfg) {
    std::vector<CheckReport> out;
    const Grid1D g(-10.0, 10.0, 2001);
    const Field rho = Field::sample(g, [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); });
    const double tol = 1e-4 * cfg.tol_scale;
    out.push_back(CheckReport::make("stein zeta=1", stein_residual(rho, [](double) { return 1.0; },
                                                                   [](double) { return 0.0; }),
                                    tol));
    out.push_back(CheckReport::make("stein zeta=x", stein_residual(rho, [](double x) { return x; },
                                                                   [](double) { return 1.0; }),
                                    tol));
    out.push_back(CheckReport::make("stein zeta=x^2", stein_residual(rho, [](double x) { return x * x; },
                                                                     [](double x) { return 2.0 * x; }),
                                    tol));
    // truncated at x = -1: the residual is the boundary term rho(b) - rho(a)
    const Grid1D gt(-1.0, 10.0, 1101);
    const Field cut = Field::sample(gt, [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); });
    const double res = stein_residual(cut, [](double) { return 1.0; }, [](double) { return 0.0; });
    const double boundary_term = cut.values.back() - cut.values.front();
    out.push_back(CheckReport::make("stein truncated vs boundary term", (res - boundary_term) / boundary_term,
                                    0.05 * cfg.tol_scale, "residual=" + fmt(res) + " boundary=" + fmt(boundary_term)));
    return out;
}

std::vector<CheckReport> check_absorbing(const BenchConfig& cfg) {
    std::vector<CheckReport> out;
    const Preset p = make_preset("bm_absorb");
    const DensityPath path = solve_fp(p.spec, p.feedback, p.rho0, p.grid, p.time_grid, p.boundary);
    const auto balance = mass_balance(path);
    double worst = 0.0;
    for (double b : balance) worst = std::max(worst, std::abs(b));
    out.push_back(CheckReport::make("mass_balance", worst, 1e-2 * cfg.tol_scale, "t in [0, 1]"));

    // reflection principle: P(alive at 1 | x0) = erf(x0 / sqrt 2), averaged over rho0
    const Grid1D q(p.rho0.support_lo, p.rho0.support_hi, 20001);
    std::vector<double> w(q.size()), m(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double x0 = q.x(i);
        w[i] = p.rho0(x0);
        m[i] = w[i] * (x0 > 0.0 ? std::erf(x0 / std::numbers::sqrt2) : 0.0);
    }
    const double oracle = trapezoid(m, q.dx()) / trapezoid(w, q.dx());
    const double alive = path.alive_mass.back();
    out.push_back(CheckReport::make("alive_at_1_rel_error", alive / oracle - 1.0, 1e-2 * cfg.tol_scale,
                                    "alive=" + fmt(alive) + " oracle=" + fmt(oracle)));

    McConfig mc;
    mc.n_paths = 100000;
    mc.seed = cfg.seed;
    mc.jobs = cfg.jobs;
    mc.horizon = 1.0;
    mc.dt = 1e-3;
    const McResult r = simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, mc);
    out.push_back(CheckReport::make("mc_survival_vs_fp", r.survival() - alive, 2e-2 * cfg.tol_scale,
                                    "mc=" + fmt(r.survival())));
    return out;
}

std::vector<CheckReport> check_ito(const BenchConfig& cfg) {
    std::vector<CheckReport> out;
    const Preset p = make_preset("ou");
    ItoRecoveryConfig ic;
    ic.x_grid = p.grid;
    ic.time_grid = TimeGrid::with_step(0.0, 0.5, p.time_grid.dt());
    ic.particles = 100000;
    ic.jobs = cfg.jobs;
    const MonotoneMap affine{[](double x) { return 2.0 * x + 1.0; }, [](double) { return 2.0; },
                             [](double) { return 0.0; }};
    const MonotoneMap cubic{[](double x) { return x * x * x + x; }, [](double x) { return 3.0 * x * x + 1.0; },
                            [](double x) { return 6.0 * x; }};
    out.push_back(CheckReport::make("ito g=2x+1", ito_recovery_residual(p.spec, p.feedback, p.rho0, affine, ic),
                                    0.05 * cfg.tol_scale));
    out.push_back(CheckReport::make("ito g=x^3+x", ito_recovery_residual(p.spec, p.feedback, p.rho0, cubic, ic),
                                    0.05 * cfg.tol_scale));
    return out;
}

std::vector<CheckReport> check_duality(const BenchConfig& cfg) {
    const Preset p = make_preset("ou_cost");
    SweepConfig sc;
    sc.jobs = cfg.jobs;
    const SweepState st = fb_sweep(p.spec, p.rho0, p.grid, p.time_grid, SweepTargets{}, sc);
    const ValueField v = solve_hjb_dirichlet(p.spec, p.boundary, p.grid, p.time_grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < v.frames.size(); ++k) {
        const Field vx = gradient_central(v.frames[k]);
        for (std::size_t i = 0; i < p.grid.size(); ++i) {
            if (std::abs(p.grid.x(i)) > 3.0) continue;
            worst = std::max(worst, std::abs(st.costate.frames[k].values[i] - vx.values[i]));
        }
    }
    return {CheckReport::make("sweep_converged", st.converged ? 0.0 : 1.0, 0.0),
            CheckReport::make("costate_vs_value_gradient", worst, 3e-2 * cfg.tol_scale, "|x| <= 3, all t")};
}

}  // namespace

std::vector<std::string> benchmark_names() { return {"american_put", "brownian_bridge", "lq_steer"}; }

std::vector<CheckReport> run_benchmark(const std::string& name, const BenchConfig& cfg) {
    if (name == "american_put") return bench_put(cfg);
    if (name == "brownian_bridge") return bench_bridge(cfg);
    if (name == "lq_steer") return bench_lq(cfg);
    throw Error(ErrorKind::UnknownPreset, "unknown benchmark '" + name + "'");
}

std::vector<std::string> check_names() {
    return {"stein", "marginal", "deterministic", "absorbing", "ito", "decomposition", "duality"};
}

std::vector<CheckReport> run_check(const std::string& name, const BenchConfig& cfg) {
    if (name == "stein") return check_stein(cfg);
    if (name == "marginal" || name == "deterministic") {
        const bool det = name == "deterministic";
        const Preset p = make_preset(det ? "integrator" : "ou");
        MarginalConfig mc;
        mc.seed = cfg.seed;
        mc.jobs = cfg.jobs;
        if (det) {
            mc.checkpoints = {1.0};
            mc.w1_tol = 2.0 * p.grid.dx() * cfg.tol_scale;
        } else {
            mc.w1_tol = 0.02 * cfg.tol_scale;
        }
        return marginal_equivalence_report(p, mc);
    }
    if (name == "absorbing") return check_absorbing(cfg);
    if (name == "ito") return check_ito(cfg);
    if (name == "decomposition") {
        DecompositionConfig dc;
        dc.seed = cfg.seed;
        dc.jobs = cfg.jobs;
        dc.relative = 0.02 * cfg.tol_scale;
        dc.se_multiple = 3.0 * cfg.tol_scale;
        return {decomposition_report(make_preset("ou_cost"), dc)};
    }
    if (name == "duality") return check_duality(cfg);
    throw Error(ErrorKind::UnknownPreset, "unknown check '" + name + "'");
}

}  // namespace dsteer
