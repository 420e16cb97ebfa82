#include "dsteer/optimality.hpp"

#include "dsteer/errors.hpp"
#include "dsteer/parallel.hpp"
#include "dsteer/value_hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dsteer {

Field CostateField::frame_at(double t) const {
    const auto& tg = time_grid;
    if (frames.size() == 1 || t <= tg.t0()) return frames.front();
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

double modified_hamiltonian(const ProblemSpec& spec, double t, double x, double u, double lambda, double lambda_x) {
    return lambda * spec.drift(t, x, u) + spec.running_cost(t, x, u) + spec.half_sigma_sq(t) * lambda_x;
}

double terminal_costate(const ProblemSpec& spec, double eta, double tau, double x) {
    double lam = partial(spec, PartialTag::TerminalCostDx, tau, x);
    if (spec.has_constraint()) lam -= eta * partial(spec, PartialTag::ConstraintDx, tau, x);
    return lam;
}

double stopping_residual(const ProblemSpec& spec, double t, double x, double u, double lambda, double lambda_x,
                         double eta) {
    double r = modified_hamiltonian(spec, t, x, u, lambda, lambda_x) + partial(spec, PartialTag::TerminalCostDt, t, x);
    if (spec.has_constraint()) r -= eta * partial(spec, PartialTag::ConstraintDt, t, x);
    return r;
}

namespace {

/// Alive mask and sub-cell boundary points of one time level.
struct Geometry {
    std::vector<char> alive;
    std::optional<double> cut_lo;  // stopped at or below
    std::optional<double> cut_hi;  // stopped at or above
    std::ptrdiff_t first_alive = -1;
    std::ptrdiff_t last_alive = -1;
};

Geometry geometry_at(const Grid1D& g, const StoppingBoundary& boundary, double t) {
    Geometry geo;
    const std::size_t n = g.size();
    geo.alive.assign(n, 1);
    if (boundary.active())
        for (std::size_t i = 0; i < n; ++i) geo.alive[i] = inside_continuation(boundary, t, g.x(i)) ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i)
        if (geo.alive[i]) {
            if (geo.first_alive < 0) geo.first_alive = static_cast<std::ptrdiff_t>(i);
            geo.last_alive = static_cast<std::ptrdiff_t>(i);
        }
    using K = StoppingBoundary::Kind;
    if (boundary.kind() == K::StopBelow || boundary.kind() == K::Interval) geo.cut_lo = boundary.lower()(t);
    if (boundary.kind() == K::StopAbove || boundary.kind() == K::Interval) geo.cut_hi = boundary.upper()(t);
    return geo;
}

struct StepContext {
    const ProblemSpec& spec;
    const Feedback& u;
    const StoppingBoundary& boundary;
    double eta;
    const CostateOptions& opts;
};

double os3(const StepContext& c, double t, double x) { return terminal_costate(c.spec, c.eta, t, x); }

/// lambda and lambda_x of frame `lam` at X, honoring stopped nodes and cut points.
std::pair<double, double> sample_costate(const StepContext& c, const Field& lam, const Geometry& geo, double t,
                                         double x) {
    const auto& g = lam.grid;
    const std::size_t n = g.size();
    const double dx = g.dx();
    const auto& v = lam.values;
    if (c.boundary.active() && !inside_continuation(c.boundary, t, x)) {
        const double h = 1e-6 * std::max(1.0, std::abs(x));
        return {os3(c, t, x), (os3(c, t, x + h) - os3(c, t, x - h)) / (2.0 * h)};
    }
    if (geo.cut_hi && geo.last_alive >= 0) {
        const auto a = static_cast<std::size_t>(geo.last_alive);
        if (x > g.x(a) && a + 1 < n) {
            const double b = *geo.cut_hi;
            const double slope = (os3(c, t, b) - v[a]) / std::max(b - g.x(a), 1e-12);
            return {v[a] + slope * (x - g.x(a)), slope};
        }
    }
    if (geo.cut_lo && geo.first_alive >= 0) {
        const auto a = static_cast<std::size_t>(geo.first_alive);
        if (x < g.x(a) && a > 0) {
            const double b = *geo.cut_lo;
            const double slope = (v[a] - os3(c, t, b)) / std::max(g.x(a) - b, 1e-12);
            return {v[a] + slope * (x - g.x(a)), slope};
        }
    }
    const double r = std::clamp((x - g.x_min()) / dx, 0.0, static_cast<double>(n - 1));
    auto i = static_cast<std::size_t>(r);
    if (i >= n - 1) i = n - 2;
    const double w = r - static_cast<double>(i);
    const bool cubic_ok = i >= 1 && i + 2 < n && geo.alive[i - 1] && geo.alive[i] && geo.alive[i + 1] &&
                          geo.alive[i + 2];
    if (cubic_ok) {
        const double p0 = v[i - 1], p1 = v[i], p2 = v[i + 1], p3 = v[i + 2];
        const double val = -w * (w - 1.0) * (w - 2.0) / 6.0 * p0 + (w + 1.0) * (w - 1.0) * (w - 2.0) / 2.0 * p1 -
                           (w + 1.0) * w * (w - 2.0) / 2.0 * p2 + (w + 1.0) * w * (w - 1.0) / 6.0 * p3;
        const double d0 = -(3.0 * w * w - 6.0 * w + 2.0) / 6.0;
        const double d1 = (3.0 * w * w - 4.0 * w - 1.0) / 2.0;
        const double d2 = -(3.0 * w * w - 2.0 * w - 2.0) / 2.0;
        const double d3 = (3.0 * w * w - 1.0) / 6.0;
        return {val, (d0 * p0 + d1 * p1 + d2 * p2 + d3 * p3) / dx};
    }
    return {v[i] + w * (v[i + 1] - v[i]), (v[i + 1] - v[i]) / dx};
}

/// Predictor part of one backward step: lambda^{k+1} at the characteristic foot plus dt times the sources.
std::vector<double> predictor(const StepContext& c, const Field& lam_next, const Geometry& geo_next, double t_next,
                              const Geometry& geo, double t, double dt, const ScoreField& score) {
    const auto& g = lam_next.grid;
    const std::size_t n = g.size();
    const double d = c.spec.half_sigma_sq(t);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!geo.alive[i]) continue;
        const double x = g.x(i);
        const double ui = c.u(t, x);
        const double s = c.opts.score_corrected && score.valid[i] ? score.values[i] : 0.0;
        const double vel = c.spec.drift(t, x, ui) - d * s;
        const auto [lam, lam_x] = sample_costate(c, lam_next, geo_next, t_next, x + vel * dt);
        // score source with the slope averaged over the score displacement
        double slope = lam_x;
        if (s != 0.0) slope = 0.5 * (lam_x + sample_costate(c, lam_next, geo_next, t_next, x + (vel + d * s) * dt).second);
        const double src = partial(c.spec, PartialTag::RunningCostDx, t, x, ui) +
                           lam * partial(c.spec, PartialTag::DriftDx, t, x, ui) + d * s * slope;
        out[i] = lam + dt * src;
    }
    return out;
}

/// Implicit diffusion solve with Dirichlet rows on stopped nodes and Shortley-Weller rows beside cut points.
std::vector<double> implicit_diffusion(const StepContext& c, const Grid1D& g, const Geometry& geo, double t,
                                       double dt, const std::vector<double>& rhs_in) {
    const std::size_t n = g.size();
    const double dx = g.dx();
    const double d = c.spec.half_sigma_sq(t);
    std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0), rhs(rhs_in);
    for (std::size_t i = 0; i < n; ++i) {
        if (!geo.alive[i]) {
            rhs[i] = os3(c, t, g.x(i));
            continue;
        }
        if (i == 0 || i + 1 == n) continue;
        double hl = dx, hr = dx;
        double bl = 0.0, br = 0.0;
        bool cut_left = false, cut_right = false;
        if (!geo.alive[i - 1] && geo.cut_lo) {
            hl = std::max(g.x(i) - *geo.cut_lo, 1e-3 * dx);
            bl = os3(c, t, *geo.cut_lo);
            cut_left = true;
        }
        if (!geo.alive[i + 1] && geo.cut_hi) {
            hr = std::max(*geo.cut_hi - g.x(i), 1e-3 * dx);
            br = os3(c, t, *geo.cut_hi);
            cut_right = true;
        }
        const double al = 2.0 * d * dt / (hl * (hl + hr));
        const double ar = 2.0 * d * dt / (hr * (hl + hr));
        diag[i] = 1.0 + al + ar;
        if (cut_left) rhs[i] += al * bl;
        else lower[i] = -al;
        if (cut_right) rhs[i] += ar * br;
        else upper[i] = -ar;
    }
    return solve_tridiagonal(lower, diag, upper, rhs);
}

std::vector<ScoreField> scores_of(const ProblemSpec& spec, const Feedback& u, const DensityPath& rho,
                                  const StoppingBoundary& boundary, const CostateOptions& opts) {
    if (!opts.score_corrected) return {};
    return build_velocity_field(spec, u, rho, boundary, opts.score).scores;
}

ScoreField zero_score(const Grid1D& g) {
    return ScoreField{g, std::vector<double>(g.size(), 0.0), std::vector<char>(g.size(), 1)};
}

}  // namespace

CostateField costate_sweep(const ProblemSpec& spec, const Feedback& u, const DensityPath& rho,
                           const StoppingBoundary& boundary, double eta, const CostateOptions& opts) {
    const auto& tg = rho.time_grid;
    const Grid1D& g = rho.grid();
    const std::size_t steps = tg.steps();
    const StepContext c{spec, u, boundary, eta, opts};
    const auto scores = scores_of(spec, u, rho, boundary, opts);
    const ScoreField none = zero_score(g);

    CostateField out;
    out.time_grid = tg;
    out.frames.assign(steps + 1, Field(g));
    Field lam(g);
    for (std::size_t i = 0; i < g.size(); ++i) lam.values[i] = terminal_costate(spec, eta, tg.t1(), g.x(i));
    out.frames[steps] = lam;

    Geometry geo_next = geometry_at(g, boundary, tg.t1());
    for (std::size_t k = steps; k-- > 0;) {
        const double t = tg.t(k);
        const double t_next = tg.t(k + 1);
        const double dt = t_next - t;
        const Geometry geo = geometry_at(g, boundary, t);
        const auto& score = opts.score_corrected ? scores[k] : none;
        auto rhs = predictor(c, lam, geo_next, t_next, geo, t, dt, score);
        lam.values = implicit_diffusion(c, g, geo, t, dt, rhs);
        for (double v : lam.values)
            if (!std::isfinite(v) || std::abs(v) > 1e12)
                throw Error(ErrorKind::SchemeDiverged, "costate diverged at t=" + std::to_string(t));
        out.frames[k] = lam;
        geo_next = geo;
    }
    return out;
}

double costate_defect(const ProblemSpec& spec, const Feedback& u, const DensityPath& rho,
                      const StoppingBoundary& boundary, double eta, const CostateField& lambda,
                      const CostateOptions& opts) {
    const auto& tg = rho.time_grid;
    const Grid1D& g = rho.grid();
    const StepContext c{spec, u, boundary, eta, opts};
    const auto scores = build_velocity_field(spec, u, rho, boundary, opts.score).scores;
    const ScoreField none = zero_score(g);
    double worst = 0.0;
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        const double t = tg.t(k);
        const double t_next = tg.t(k + 1);
        const double dt = t_next - t;
        const Geometry geo = geometry_at(g, boundary, t);
        const Geometry geo_next = geometry_at(g, boundary, t_next);
        const auto& score = opts.score_corrected ? scores[k] : none;
        auto rhs = predictor(c, lambda.frames[k + 1], geo_next, t_next, geo, t, dt, score);
        const auto stepped = implicit_diffusion(c, g, geo, t, dt, rhs);
        for (std::size_t i = 1; i + 1 < g.size(); ++i) {
            if (!geo.alive[i] || !scores[k].valid[i]) continue;
            worst = std::max(worst, std::abs(lambda.frames[k].values[i] - stepped[i]) / dt);
        }
    }
    return worst;
}

std::vector<Field> stationarity_residual(const ProblemSpec& spec, const Feedback& u, const CostateField& lambda) {
    std::vector<Field> out;
    out.reserve(lambda.frames.size());
    for (std::size_t k = 0; k < lambda.frames.size(); ++k) {
        const double t = lambda.time_grid.t(k);
        const auto& lam = lambda.frames[k];
        Field r(lam.grid);
        for (std::size_t i = 0; i < lam.size(); ++i) {
            const double x = lam.grid.x(i);
            const double ui = u(t, x);
            r.values[i] = partial(spec, PartialTag::RunningCostDu, t, x, ui) +
                          lam.values[i] * partial(spec, PartialTag::DriftDu, t, x, ui);
        }
        out.push_back(std::move(r));
    }
    return out;
}

double common_stopping_residual(const ProblemSpec& spec, const Field& lambda_tau, const Field& rho_tau,
                                const Feedback& u, double eta, double tau) {
    const Field lam_x = gradient_central(lambda_tau);
    const auto& g = rho_tau.grid;
    std::vector<double> weighted(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.x(i);
        weighted[i] = rho_tau.values[i] *
                      stopping_residual(spec, tau, x, u(tau, x), lambda_tau.values[i], lam_x.values[i], eta);
    }
    const double mass = trapezoid(rho_tau);
    if (!(mass > 0.0)) throw Error(ErrorKind::EmptyInput, "no alive mass at the stopping time");
    return trapezoid(weighted, g.dx()) / mass;
}

double constraint_residual(const ProblemSpec& spec, std::span<const double> x_stop, std::span<const double> t_stop) {
    if (!spec.has_constraint()) return 0.0;
    if (x_stop.empty() || x_stop.size() != t_stop.size())
        throw Error(ErrorKind::EmptyInput, "stopping ensemble is empty or inconsistent");
    std::vector<double> psi(x_stop.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = spec.constraint(t_stop[i], x_stop[i]);
    return pairwise_sum(psi) / static_cast<double>(psi.size());
}

namespace {

/// Time-trapezoid of flux * h(t, exit point) over the whole path.
double exit_expectation(const DensityPath& rho, const SpaceTimeMap& h) {
    const auto& tg = rho.time_grid;
    double total = 0.0;
    for (std::size_t k = 0; k < rho.exit_flux.size(); ++k) {
        const auto& rec = rho.exit_flux[k];
        if (rec.exit_locations.empty()) continue;
        const double xl = rec.exit_locations.front();
        const double xr = rec.exit_locations.back();
        double v;
        if (rec.exit_locations.size() == 1) v = rec.total() * h(rec.t, xl);
        else v = rec.flux_left * h(rec.t, xl) + rec.flux_right * h(rec.t, xr);
        const double w = (k == 0 || k + 1 == rho.exit_flux.size()) ? 0.5 : 1.0;
        total += w * tg.dt() * v;
    }
    return total;
}

double terminal_expectation(const DensityPath& rho, const SpaceTimeMap& h) {
    const auto& last = rho.frames.back();
    const double t = rho.time_grid.t1();
    std::vector<double> v(last.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = h(t, last.grid.x(i)) * last.values[i];
    return trapezoid(v, last.grid.dx());
}

}  // namespace

double constraint_residual(const ProblemSpec& spec, const DensityPath& rho) {
    if (!spec.has_constraint()) return 0.0;
    return terminal_expectation(rho, spec.constraint) + exit_expectation(rho, spec.constraint);
}

double objective_value(const ProblemSpec& spec, const Feedback& u, const DensityPath& rho) {
    const auto& tg = rho.time_grid;
    const std::size_t m = rho.frames.size();
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double t = tg.t(k);
        const auto& f = rho.frames[k];
        std::vector<double> v(f.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double x = f.grid.x(i);
            v[i] = spec.running_cost(t, x, u(t, x)) * f.values[i];
        }
        const double w = (k == 0 || k + 1 == m) ? 0.5 : 1.0;
        running += w * tg.dt() * trapezoid(v, f.grid.dx());
    }
    return running + terminal_expectation(rho, spec.terminal_cost) + exit_expectation(rho, spec.terminal_cost);
}

std::vector<BoundaryResidual> boundary_stopping_residuals(const ProblemSpec& spec, const Feedback& u,
                                                          const CostateField& lambda,
                                                          const StoppingBoundary& boundary, double eta,
                                                          double t_max) {
    using K = StoppingBoundary::Kind;
    if (boundary.kind() != K::StopAbove && boundary.kind() != K::StopBelow)
        throw Error(ErrorKind::InvalidArgument, "boundary residuals need a single-sided boundary");
    const bool above = boundary.kind() == K::StopAbove;
    const auto& tg = lambda.time_grid;
    const Grid1D& g = lambda.grid();
    const double dx = g.dx();
    std::vector<BoundaryResidual> out;
    for (std::size_t k = 0; k <= tg.steps(); ++k) {
        const double t = tg.t(k);
        if (t > t_max + 1e-12) break;
        const double b = above ? boundary.upper()(t) : boundary.lower()(t);
        const auto geo = geometry_at(g, boundary, t);
        const std::ptrdiff_t a = above ? geo.last_alive : geo.first_alive;
        const std::ptrdiff_t dir = above ? -1 : 1;
        if (a < 0) continue;
        std::ptrdiff_t p1 = a;
        if (std::abs(b - g.x(static_cast<std::size_t>(a))) < 0.5 * dx) p1 = a + dir;
        const std::ptrdiff_t p2 = p1 + dir;
        if (p2 < 0 || p2 >= static_cast<std::ptrdiff_t>(g.size())) continue;
        const auto& lam = lambda.frames[k].values;
        const double x1 = g.x(static_cast<std::size_t>(p1)), x2 = g.x(static_cast<std::size_t>(p2));
        const double lb = terminal_costate(spec, eta, t, b);
        const double l1 = lam[static_cast<std::size_t>(p1)], l2 = lam[static_cast<std::size_t>(p2)];
        const double w0 = 1.0 / (b - x1) + 1.0 / (b - x2);
        const double w1 = (b - x2) / ((x1 - b) * (x1 - x2));
        const double w2 = (b - x1) / ((x2 - b) * (x2 - x1));
        const double lam_x = w0 * lb + w1 * l1 + w2 * l2;
        out.push_back({t, b, stopping_residual(spec, t, b, u(t, b), lb, lam_x, eta)});
    }
    return out;
}

Feedback SweepState::feedback() const { return tabulated_feedback(time_grid, controls); }

void require_converged(const SweepState& state) {
    if (state.converged) return;
    std::string msg = "sweep did not converge";
    if (!state.history.empty()) {
        const auto& r = state.history.back();
        msg += ": os1=" + std::to_string(r.os1) + " os2=" + std::to_string(r.os2) + " os4=" + std::to_string(r.os4) +
               " os5=" + std::to_string(r.os5);
    }
    throw Error(ErrorKind::NotConverged, msg);
}

namespace {

struct Inner {
    std::vector<Field> controls;
    CostateField costate;
    DensityPath density;
    std::vector<ResidualRecord> history;
    bool converged = false;
    std::size_t increases = 0;
};

std::vector<Field> sample_controls(const Feedback& u, const Grid1D& g, const TimeGrid& tg) {
    std::vector<Field> out;
    out.reserve(tg.steps() + 1);
    for (std::size_t k = 0; k <= tg.steps(); ++k) {
        const double t = tg.t(k);
        out.push_back(Field::sample(g, [&](double x) { return u(t, x); }));
    }
    return out;
}

/// Control that makes L_u + lambda f_u vanish: closed form or one Newton step from `u`.
double control_target(const ProblemSpec& spec, double t, double x, double u, double lam) {
    if (spec.affine_quadratic) {
        const auto& aq = *spec.affine_quadratic;
        return std::clamp(-aq.input_gain(t, x) * lam / aq.control_weight(t, x), spec.control_min, spec.control_max);
    }
    auto g = [&](double v) {
        return partial(spec, PartialTag::RunningCostDu, t, x, v) + lam * partial(spec, PartialTag::DriftDu, t, x, v);
    };
    const double h = 1e-4 * std::max(1.0, std::abs(u));
    const double slope = (g(u + h) - g(u - h)) / (2.0 * h);
    const double gu = g(u);
    if (!(std::abs(slope) > 1e-12) || !std::isfinite(slope)) return u;
    return std::clamp(u - gu / slope, spec.control_min, spec.control_max);
}

Inner run_inner(const ProblemSpec& spec, const InitialDensity& rho0, const Grid1D& grid, const TimeGrid& tg,
                const StoppingBoundary& boundary, double eta, std::vector<Field> controls, const SweepConfig& cfg,
                bool track_os4) {
    Inner st;
    std::optional<CostateField> previous;
    const std::size_t n = grid.size();
    double last_objective = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        const Feedback fb = tabulated_feedback(tg, controls);
        DensityPath rho = solve_fp(spec, fb, rho0, grid, tg, boundary);
        CostateField lam = costate_sweep(spec, fb, rho, boundary, eta, cfg.costate);

        ResidualRecord rec;
        rec.iter = it;
        const auto velocity = build_velocity_field(spec, fb, rho, boundary, cfg.costate.score);
        const auto os1 = stationarity_residual(spec, fb, lam);
        for (std::size_t k = 0; k < os1.size(); ++k) {
            const auto& valid = velocity.scores[k].valid;
            const double t = tg.t(k);
            for (std::size_t i = 1; i + 1 < n; ++i)
                if (valid[i] && inside_continuation(boundary, t, grid.x(i)))
                    rec.os1 = std::max(rec.os1, std::abs(os1[k].values[i]));
        }
        rec.os2 = previous ? costate_defect(spec, fb, rho, boundary, eta, *previous, cfg.costate)
                           : std::numeric_limits<double>::infinity();
        rec.os4 = track_os4 ? constraint_residual(spec, rho) : 0.0;
        rec.objective = objective_value(spec, fb, rho);
        if (rec.objective > last_objective + 1e-6) ++st.increases;
        last_objective = rec.objective;
        st.history.push_back(rec);

        st.density = std::move(rho);
        st.costate = lam;
        st.controls = controls;
        const bool uncontrolled = spec.control_min == spec.control_max;
        if (uncontrolled || std::max(rec.os1, rec.os2) < cfg.tol) {
            if (uncontrolled) st.history.back().os2 = 0.0;
            st.converged = true;
            break;
        }

        std::vector<Field> next = controls;
        parallel_for(tg.steps() + 1, cfg.jobs, [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                const double t = tg.t(k);
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = grid.x(i);
                    const double u_old = controls[k].values[i];
                    const double target = control_target(spec, t, x, u_old, lam.frames[k].values[i]);
                    next[k].values[i] = (1.0 - cfg.damping) * u_old + cfg.damping * target;
                }
            }
        });
        controls = std::move(next);
        previous = std::move(lam);
    }
    return st;
}

/// Secant iteration on a scalar residual, starting from two guesses.
template <class F>
std::pair<double, bool> secant(F&& residual, double a, double b, double tol, double step_tol, std::size_t max_iter) {
    double fa = residual(a);
    if (std::abs(fa) <= tol) return {a, true};
    double fb = residual(b);
    for (std::size_t it = 0; it < max_iter; ++it) {
        if (std::abs(fb) <= tol) return {b, true};
        if (fb == fa) break;
        const double c = b - fb * (b - a) / (fb - fa);
        if (!std::isfinite(c)) break;
        a = b;
        fa = fb;
        b = c;
        fb = residual(b);
        if (std::abs(b - a) <= step_tol * std::max(1.0, std::abs(b))) return {b, true};
    }
    return {b, std::abs(fb) <= tol};
}

}  // namespace

SweepState fb_sweep(const ProblemSpec& spec, const InitialDensity& rho0, const Grid1D& grid, const TimeGrid& time_grid,
                    const SweepTargets& targets, const SweepConfig& cfg) {
    const Feedback init = cfg.initial_control ? *cfg.initial_control : zero_feedback();
    SweepState state;
    std::vector<ResidualRecord> history;
    std::size_t increases = 0;

    // Inner control loop plus the eta secant for a fixed time grid and boundary.
    auto solve_fixed = [&](const TimeGrid& tg, const StoppingBoundary& boundary, const Feedback& start) {
        std::vector<Field> controls = sample_controls(start, grid, tg);
        double eta = cfg.eta_a;
        Inner best;
        bool ok = true;
        auto run_eta = [&](double e) {
            Inner in = run_inner(spec, rho0, grid, tg, boundary, e, controls, cfg, spec.has_constraint());
            for (auto rec : in.history) {
                rec.iter = history.size();
                history.push_back(rec);
            }
            increases += in.increases;
            controls = in.controls;
            ok = in.converged;
            eta = e;
            best = std::move(in);
            return best.history.back().os4;
        };
        if (!spec.has_constraint()) {
            run_eta(0.0);
        } else {
            const auto [e, hit] = secant(run_eta, cfg.eta_a, cfg.eta_b, cfg.eta_tol, 0.0, cfg.max_outer);
            if (e != eta) run_eta(e);
            ok = ok && hit && std::abs(best.history.back().os4) <= cfg.eta_tol;
        }
        return std::tuple<Inner, double, bool>{std::move(best), eta, ok};
    };

    auto fill = [&](Inner in, double eta, bool ok, const TimeGrid& tg, const StoppingBoundary& boundary) {
        state.time_grid = tg;
        state.controls = std::move(in.controls);
        state.costate = std::move(in.costate);
        state.density = std::move(in.density);
        state.eta = eta;
        state.boundary = boundary;
        state.converged = ok;
    };

    switch (targets.mode) {
        case StoppingMode::FixedHorizon: {
            auto [in, eta, ok] = solve_fixed(time_grid, targets.boundary, init);
            fill(std::move(in), eta, ok, time_grid, targets.boundary);
            break;
        }
        case StoppingMode::Common: {
            Feedback start = init;
            Inner last;
            double last_eta = 0.0;
            bool last_ok = false;
            TimeGrid last_tg;
            auto cs = [&](double tau) {
                if (!(tau > time_grid.t0())) throw Error(ErrorKind::NotConverged, "stopping time left the horizon");
                const TimeGrid tg = TimeGrid::with_step(time_grid.t0(), tau, time_grid.dt());
                auto [in, eta, ok] = solve_fixed(tg, targets.boundary, start);
                const Feedback fb = tabulated_feedback(tg, in.controls);
                const double r = common_stopping_residual(spec, in.costate.frames.back(), in.density.frames.back(),
                                                          fb, eta, tau);
                history.back().os5 = r;
                start = fb;
                last = std::move(in);
                last_eta = eta;
                last_ok = ok;
                last_tg = tg;
                return r;
            };
            const auto [tau, hit] = secant(cs, targets.tau_guess_a, targets.tau_guess_b, cfg.tol, cfg.outer_tol,
                                           cfg.max_outer);
            if (std::abs(last_tg.t1() - tau) > 0.0) cs(tau);
            fill(std::move(last), last_eta, last_ok && hit, last_tg, targets.boundary);
            state.time_assignment = TimeAssignment::common(tau);
            break;
        }
        case StoppingMode::BoundaryTemplate: {
            if (!targets.shape) throw Error(ErrorKind::InvalidArgument, "boundary template needs a shape");
            Feedback start = init;
            Inner last;
            double last_eta = 0.0;
            bool last_ok = false;
            double last_scale = 0.0;
            StoppingBoundary last_boundary;
            auto make = [&](double s) {
                const TimeMap shape = targets.shape;
                TimeMap b = [shape, s](double t) { return s * shape(t); };
                return targets.stop_above ? StoppingBoundary::stop_above(b) : StoppingBoundary::stop_below(b);
            };
            auto os5 = [&](double s) {
                const StoppingBoundary boundary = make(s);
                auto [in, eta, ok] = solve_fixed(time_grid, boundary, start);
                const Feedback fb = tabulated_feedback(time_grid, in.controls);
                const auto res = boundary_stopping_residuals(spec, fb, in.costate, boundary, eta, targets.fit_until);
                if (res.empty()) throw Error(ErrorKind::EmptyInput, "boundary never crosses the grid");
                double mean = 0.0, worst = 0.0;
                for (const auto& r : res) {
                    mean += r.residual;
                    worst = std::max(worst, std::abs(r.residual));
                }
                mean /= static_cast<double>(res.size());
                history.back().os5 = worst;
                start = fb;
                last = std::move(in);
                last_eta = eta;
                last_ok = ok;
                last_scale = s;
                last_boundary = boundary;
                return mean;
            };
            const double s0 = targets.scale_guess;
            const auto [s, hit] = secant(os5, s0, 1.05 * s0, 1e-12, 1e-5, cfg.max_outer);
            if (last_scale != s) os5(s);
            fill(std::move(last), last_eta, last_ok && hit, time_grid, last_boundary);
            state.boundary_scale = s;
            break;
        }
    }
    state.history = std::move(history);
    state.objective_increases = increases;
    return state;
}

}  // namespace dsteer
