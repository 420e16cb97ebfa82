#include "dsteer/value_hjb.hpp"

#include "dsteer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace dsteer {

Field ValueField::frame_at(double t) const {
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

Feedback tabulated_feedback(const TimeGrid& time_grid, std::vector<Field> frames) {
    if (frames.empty()) return zero_feedback();
    auto table = std::make_shared<const std::vector<Field>>(std::move(frames));
    const TimeGrid tg = time_grid;
    return [table, tg](double t, double x) {
        const auto& c = *table;
        if (c.size() == 1) return interp_linear(c.front(), x).value;
        const double s = std::clamp((t - tg.t0()) / tg.dt(), 0.0, static_cast<double>(tg.steps()));
        auto k = static_cast<std::size_t>(s);
        if (k >= tg.steps()) k = tg.steps() - 1;
        const double w = s - static_cast<double>(k);
        const double a = interp_linear(c[k], x).value;
        const double b = interp_linear(c[k + 1], x).value;
        return a + w * (b - a);
    };
}

Feedback ValueField::feedback() const { return tabulated_feedback(time_grid, controls); }

HamiltonianMin minimize_hamiltonian(const ProblemSpec& spec, double t, double x, double v_x, double v_xx,
                                    std::span<const double> u_grid) {
    const double diffusion_term = spec.half_sigma_sq(t) * v_xx;
    auto objective = [&](double u) { return spec.drift(t, x, u) * v_x + spec.running_cost(t, x, u); };
    if (spec.affine_quadratic) {
        const auto& aq = *spec.affine_quadratic;
        double u = -aq.input_gain(t, x) * v_x / aq.control_weight(t, x);
        u = std::clamp(u, spec.control_min, spec.control_max);
        return {u, objective(u) + diffusion_term};
    }
    if (spec.control_min == spec.control_max) return {spec.control_min, objective(spec.control_min) + diffusion_term};
    std::optional<double> best_u;
    double best = 0.0;
    for (double u : u_grid) {
        if (u < spec.control_min || u > spec.control_max) continue;
        const double v = objective(u);
        if (!best_u || v < best) {
            best = v;
            best_u = u;
        }
    }
    if (!best_u) throw Error(ErrorKind::EmptyControlGrid, "no closed form and no admissible control grid point");
    return {*best_u, best + diffusion_term};
}

namespace {

void check_finite(const std::vector<double>& v, double t) {
    for (double x : v)
        if (!std::isfinite(x) || std::abs(x) > 1e12)
            throw Error(ErrorKind::SchemeDiverged, "value iteration diverged at t=" + std::to_string(t));
}

}  // namespace

ValueField solve_hjb_dirichlet(const ProblemSpec& spec, const StoppingBoundary& boundary, const Grid1D& grid,
                               const TimeGrid& time_grid, const HjbOptions& opts) {
    const std::size_t n = grid.size();
    const std::size_t steps = time_grid.steps();
    const double dx = grid.dx();
    const double r = spec.discount;
    const bool closed_form = spec.affine_quadratic.has_value();
    if (!closed_form && spec.control_min != spec.control_max && opts.u_grid.empty())
        throw Error(ErrorKind::EmptyControlGrid, "no closed form and no control grid");

    ValueField out;
    out.time_grid = time_grid;
    out.frames.assign(steps + 1, Field(grid));
    out.controls.assign(steps + 1, Field(grid));
    out.free_boundary.assign(steps + 1, std::nullopt);

    const double t_end = time_grid.t1();
    Field v(grid);
    if (opts.terminal) {
        v = *opts.terminal;
    } else {
        for (std::size_t i = 0; i < n; ++i) v.values[i] = spec.terminal_cost(t_end, grid.x(i));
    }

    std::vector<double> f(n), l(n), u(n);
    auto controls_for = [&](const Field& val, double t) {
        const Field vx = gradient_central(val);
        const Field vxx = second_derivative(val);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid.x(i);
            const auto hm = minimize_hamiltonian(spec, t, x, vx.values[i], vxx.values[i], opts.u_grid);
            u[i] = hm.control;
            f[i] = spec.drift(t, x, u[i]);
            l[i] = spec.running_cost(t, x, u[i]);
        }
    };

    out.frames[steps] = v;
    controls_for(v, t_end);
    out.controls[steps] = Field(grid, u);

    std::vector<double> lower(n), diag(n), upper(n), rhs(n);
    std::vector<char> stopped(n, 0);
    for (std::size_t k = steps; k-- > 0;) {
        const double t_hi = time_grid.t(k + 1);
        const double t_lo = time_grid.t(k);
        const double dt_full = t_hi - t_lo;

        controls_for(v, t_hi);
        // central advection where the cell Peclet number allows it, upwind elsewhere;
        // explicit central terms also need f^2 dt <= 2 D
        const double d_hi = spec.half_sigma_sq(t_hi);
        double rate = 0.0;
        for (double fi : f) {
            const double a = std::abs(fi);
            if (a == 0.0) continue;
            rate = std::max(rate, a * dx <= 2.0 * d_hi ? a * a / (2.0 * d_hi) : a / dx);
        }
        const auto sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dt_full * rate / 0.9)));
        const double dt = dt_full / static_cast<double>(sub);

        for (std::size_t s = 0; s < sub; ++s) {
            const double t_from = t_hi - static_cast<double>(s) * dt;
            const double t_to = t_from - dt;
            if (s > 0) controls_for(v, t_from);
            const double d = spec.half_sigma_sq(t_to);
            const Field vxx = second_derivative(v);
            const auto& vv = v.values;
            for (std::size_t i = 0; i < n; ++i)
                stopped[i] = boundary.active() && !inside_continuation(boundary, t_to, grid.x(i)) ? 1 : 0;

            std::vector<double> ham(n);
            for (std::size_t i = 0; i < n; ++i) {
                double vx;
                if (i == 0) vx = (vv[1] - vv[0]) / dx;
                else if (i + 1 == n) vx = (vv[n - 1] - vv[n - 2]) / dx;
                else if (std::abs(f[i]) * dx <= 2.0 * d) vx = (vv[i + 1] - vv[i - 1]) / (2.0 * dx);
                else vx = f[i] > 0.0 ? (vv[i + 1] - vv[i]) / dx : (vv[i] - vv[i - 1]) / dx;
                ham[i] = f[i] * vx + l[i];
            }
            const double c = d * dt / (dx * dx);
            for (std::size_t i = 0; i < n; ++i) {
                lower[i] = upper[i] = 0.0;
                if (stopped[i]) {
                    diag[i] = 1.0;
                    rhs[i] = spec.terminal_cost(t_to, grid.x(i));
                } else if (i == 0 || i + 1 == n) {
                    diag[i] = 1.0;
                    rhs[i] = (vv[i] + dt * (ham[i] + d * vxx.values[i])) / (1.0 + r * dt);
                } else {
                    diag[i] = 1.0 + r * dt + 2.0 * c;
                    lower[i] = -c;
                    upper[i] = -c;
                    rhs[i] = vv[i] + dt * ham[i];
                }
            }
            v.values = solve_tridiagonal(lower, diag, upper, rhs);
            check_finite(v.values, t_to);
        }
        out.frames[k] = v;
        controls_for(v, t_lo);
        out.controls[k] = Field(grid, u);
    }
    return out;
}

std::optional<double> contact_edge(const Field& value, const Field& obstacle, double contact_tol) {
    const auto& g = value.grid;
    const std::size_t n = g.size();
    if (n < 4) return std::nullopt;
    std::vector<double> gap(n);
    for (std::size_t i = 0; i < n; ++i) gap[i] = std::max(0.0, obstacle.values[i] - value.values[i]);
    const double scale = std::max(1.0, obstacle.max_abs());
    auto in_contact = [&](std::size_t i) { return gap[i] <= contact_tol * scale; };

    // longest contact run among interior nodes
    std::size_t best_lo = 0, best_len = 0;
    for (std::size_t i = 1; i + 1 < n;) {
        if (!in_contact(i)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n - 1 && in_contact(j + 1)) ++j;
        if (j - i + 1 > best_len) {
            best_len = j - i + 1;
            best_lo = i;
        }
        i = j + 1;
    }
    if (best_len == 0) return std::nullopt;
    const std::size_t lo = best_lo, hi = best_lo + best_len - 1;
    // sqrt of the gap is locally linear in x beside a smooth-pasting edge
    auto edge = [&](std::size_t contact, std::size_t near, std::size_t far) {
        const double g1 = std::sqrt(gap[near]), g2 = std::sqrt(gap[far]);
        if (!(g2 > g1)) return g.x(contact);
        const double x = (g.x(near) * g2 - g.x(far) * g1) / (g2 - g1);
        return std::clamp(x, std::min(g.x(contact), g.x(near)), std::max(g.x(contact), g.x(near)));
    };
    const bool right_open = hi + 2 < n;
    const bool left_open = lo >= 2;
    if (right_open && (!left_open || lo <= 1)) return edge(hi, hi + 1, hi + 2);
    if (left_open && hi + 2 >= n - 1) return edge(lo, lo - 1, lo - 2);
    if (right_open) return edge(hi, hi + 1, hi + 2);
    return std::nullopt;
}

ValueField solve_obstacle_vi(const ProblemSpec& spec, const SpaceTimeMap& obstacle, const Grid1D& grid,
                             const ViOptions& opts) {
    const std::size_t n = grid.size();
    const double dx = grid.dx();
    const double r = spec.discount;
    const Feedback control = opts.control ? opts.control : zero_feedback();

    auto obstacle_frame = [&](double t) {
        Field psi(grid);
        for (std::size_t i = 0; i < n; ++i) psi.values[i] = obstacle(t, grid.x(i));
        return psi;
    };

    struct Rows {
        std::vector<double> lower, diag, upper, rhs;
    };
    // Implicit upwind rows for one step of size dt (dt <= 0: the elliptic operator alone).
    auto assemble = [&](const Field& prev, double t, double dt) {
        Rows rows{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
        const double d = spec.half_sigma_sq(t);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = grid.x(i);
            const double ui = control(t, x);
            const double f = spec.drift(t, x, ui);
            const double up = d / (dx * dx) + std::max(f, 0.0) / dx;
            const double lo = d / (dx * dx) + std::max(-f, 0.0) / dx;
            const double inv_dt = dt > 0.0 ? 1.0 / dt : 0.0;
            rows.lower[i] = lo;
            rows.upper[i] = up;
            rows.diag[i] = inv_dt + r + up + lo;
            rows.rhs[i] = inv_dt * prev.values[i] + spec.running_cost(t, x, ui);
        }
        return rows;
    };

    std::size_t total_sweeps = 0;
    auto psor = [&](Field& v, const Rows& rows, const Field& psi) {
        auto& x = v.values;
        for (std::size_t it = 0; it < opts.psor_max_iter; ++it) {
            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double next;
                if (i == 0 || i + 1 == n) {
                    if (opts.ends == ViEnds::Obstacle) next = psi.values[i];
                    else next = std::min(psi.values[i], i == 0 ? 2.0 * x[1] - x[2] : 2.0 * x[n - 2] - x[n - 3]);
                } else {
                    const double gs = (rows.rhs[i] + rows.upper[i] * x[i + 1] + rows.lower[i] * x[i - 1]) / rows.diag[i];
                    next = std::min(psi.values[i], x[i] + opts.omega * (gs - x[i]));
                }
                change = std::max(change, std::abs(next - x[i]));
                x[i] = next;
            }
            ++total_sweeps;
            if (change <= opts.psor_tol * std::max(1.0, v.max_abs())) return;
        }
        throw Error(ErrorKind::PsorStalled, "PSOR did not reach tolerance");
    };

    auto report = [&](const Field& v, const Rows& rows, const Field& psi) {
        ComplementarityReport rep{1e300, 1e300, 0.0};
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double av = rows.diag[i] * v.values[i] - rows.upper[i] * v.values[i + 1] - rows.lower[i] * v.values[i - 1];
            const double cont = (rows.rhs[i] - av) / rows.diag[i];
            const double gap = psi.values[i] - v.values[i];
            rep.min_continuation = std::min(rep.min_continuation, cont);
            rep.min_gap = std::min(rep.min_gap, gap);
            rep.max_product = std::max(rep.max_product, std::abs(cont * gap));
        }
        return rep;
    };

    ValueField out;
    if (opts.stationary) {
        const double t = 0.0;
        const Field psi = obstacle_frame(t);
        Field v = psi;
        bool converged = false;
        for (std::size_t k = 0; k < opts.max_pseudo_steps; ++k) {
            const Field prev = v;
            psor(v, assemble(prev, t, opts.pseudo_dt), psi);
            check_finite(v.values, t);
            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(v.values[i] - prev.values[i]));
            if (change <= opts.stationary_tol * std::max(1.0, v.max_abs())) {
                converged = true;
                break;
            }
        }
        if (!converged) throw Error(ErrorKind::NotConverged, "pseudo-time marching did not reach a fixed point");
        // polish on the elliptic operator itself so the complementarity report is exact
        const Rows elliptic = assemble(v, t, 0.0);
        psor(v, elliptic, psi);
        out.time_grid = TimeGrid(0.0, 1.0, 1);
        out.frames = {v, v};
        out.free_boundary = {contact_edge(v, psi, opts.contact_tol), contact_edge(v, psi, opts.contact_tol)};
        out.complementarity = report(v, elliptic, psi);
        out.iterations = total_sweeps;
        return out;
    }

    const auto& tg = opts.time_grid;
    const std::size_t steps = tg.steps();
    out.time_grid = tg;
    out.frames.assign(steps + 1, Field(grid));
    out.free_boundary.assign(steps + 1, std::nullopt);
    Field psi = obstacle_frame(tg.t1());
    Field v(grid);
    for (std::size_t i = 0; i < n; ++i) v.values[i] = std::min(spec.terminal_cost(tg.t1(), grid.x(i)), psi.values[i]);
    out.frames[steps] = v;
    out.free_boundary[steps] = contact_edge(v, psi, opts.contact_tol);
    for (std::size_t k = steps; k-- > 0;) {
        const double t = tg.t(k);
        psi = obstacle_frame(t);
        const Field prev = v;
        const Rows rows = assemble(prev, t, tg.t(k + 1) - t);
        psor(v, rows, psi);
        check_finite(v.values, t);
        out.frames[k] = v;
        out.free_boundary[k] = contact_edge(v, psi, opts.contact_tol);
        if (k == 0) out.complementarity = report(v, rows, psi);
    }
    out.iterations = total_sweeps;
    return out;
}

double distributional_value(const ValueField& value, const Field& mu, double t) {
    const Field v = value.frame_at(t);
    const auto& g = v.grid;
    std::vector<double> prod(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.x(i);
        const bool outside = x < mu.grid.x_min() || x > mu.grid.x_max();
        const double m = outside ? 0.0 : interp_linear(mu, x).value;
        prod[i] = v.values[i] * m;
    }
    return trapezoid(prod, g.dx());
}

}  // namespace dsteer
