#include "dsteer/transform.hpp"

#include "dsteer/errors.hpp"
#include "dsteer/parallel.hpp"
#include "dsteer/sde_mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dsteer {

std::size_t ScoreField::valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), char{1}));
}

double default_score_floor(const Field& frame, double floor_rel) {
    double m = 0.0;
    for (double v : frame.values) m = std::max(m, v);
    return std::max(floor_rel * m, std::numeric_limits<double>::min());
}

ScoreField score_field(const Field& frame, double floor, double layer_width, const StoppingBoundary& boundary,
                       double t) {
    if (!(floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "score floor must be positive");
    const auto& g = frame.grid;
    const std::size_t n = g.size();
    const Field grad = gradient_central(frame);

    ScoreField s{g, std::vector<double>(n, 0.0), std::vector<char>(n, 1)};
    for (std::size_t i = 0; i < n; ++i) {
        const double rho = frame.values[i];
        s.values[i] = grad.values[i] / std::max(rho, floor);
        if (rho < floor) s.valid[i] = 0;
    }
    if (boundary.active()) {
        const auto reach = static_cast<std::ptrdiff_t>(std::floor(layer_width / g.dx() + 1e-9));
        const auto sn = static_cast<std::ptrdiff_t>(n);
        for (std::ptrdiff_t k = 0; k < sn; ++k) {
            if (inside_continuation(boundary, t, g.x(static_cast<std::size_t>(k)))) continue;
            const auto lo = std::max<std::ptrdiff_t>(0, k - reach);
            const auto hi = std::min<std::ptrdiff_t>(sn - 1, k + reach);
            for (auto j = lo; j <= hi; ++j) s.valid[static_cast<std::size_t>(j)] = 0;
        }
    }
    if (s.valid_count() == 0) throw Error(ErrorKind::AllMasked, "no valid score node");

    // constant extrapolation from the nearest valid node (left wins ties)
    std::vector<std::ptrdiff_t> left(n, -1), right(n, -1);
    std::ptrdiff_t last = -1;
    for (std::size_t i = 0; i < n; ++i) {
        if (s.valid[i]) last = static_cast<std::ptrdiff_t>(i);
        left[i] = last;
    }
    last = -1;
    for (std::size_t i = n; i-- > 0;) {
        if (s.valid[i]) last = static_cast<std::ptrdiff_t>(i);
        right[i] = last;
    }
    const auto raw = s.values;
    for (std::size_t i = 0; i < n; ++i) {
        if (s.valid[i]) continue;
        const auto si = static_cast<std::ptrdiff_t>(i);
        std::ptrdiff_t src;
        if (left[i] < 0) src = right[i];
        else if (right[i] < 0) src = left[i];
        else src = (si - left[i] <= right[i] - si) ? left[i] : right[i];
        s.values[i] = raw[static_cast<std::size_t>(src)];
    }
    return s;
}

Field transformed_drift(const ProblemSpec& spec, const Feedback& u, const ScoreField& score, double t) {
    const double d = spec.half_sigma_sq(t);
    Field out(score.grid);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = score.grid.x(i);
        out.values[i] = spec.drift(t, x, u(t, x)) - d * score.values[i];
    }
    return out;
}

double VelocityField::at(double t, double x) const {
    const double s = std::clamp((t - time_grid.t0()) / time_grid.dt(), 0.0, static_cast<double>(time_grid.steps()));
    auto k = static_cast<std::size_t>(s);
    if (k >= time_grid.steps()) k = time_grid.steps() - 1;
    const double wt = s - static_cast<double>(k);

    const std::size_t n = grid.size();
    const double r = std::clamp((x - grid.x_min()) / grid.dx(), 0.0, static_cast<double>(n - 1));
    auto i = static_cast<std::size_t>(r);
    if (i >= n - 1) i = n - 2;
    const double wx = r - static_cast<double>(i);

    const auto& a = frames[k];
    const auto& b = frames[k + 1];
    const double va = a[i] + wx * (a[i + 1] - a[i]);
    const double vb = b[i] + wx * (b[i + 1] - b[i]);
    return va + wt * (vb - va);
}

VelocityField build_velocity_field(const ProblemSpec& spec, const Feedback& u, const DensityPath& path,
                                   const StoppingBoundary& boundary, const ScoreOptions& opts) {
    VelocityField v;
    v.time_grid = path.time_grid;
    v.grid = path.grid();
    const std::size_t m = path.frames.size();
    v.frames.resize(m);
    v.scores.resize(m);
    const double layer = opts.layer_cells * v.grid.dx();
    double budget = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double t = path.time_grid.t(k);
        const auto& rho = path.frames[k];
        v.scores[k] = score_field(rho, default_score_floor(rho, opts.floor_rel), layer, boundary, t);
        v.frames[k] = transformed_drift(spec, u, v.scores[k], t).values;
        std::vector<double> energy(rho.size(), 0.0);
        for (std::size_t i = 0; i < rho.size(); ++i)
            if (v.scores[k].valid[i]) energy[i] = v.frames[k][i] * v.frames[k][i] * rho.values[i];
        const double w = (k == 0 || k + 1 == m) ? 0.5 : 1.0;
        budget += w * path.time_grid.dt() * trapezoid(energy, v.grid.dx());
    }
    v.kinetic_budget = budget;
    return v;
}

ParticleEnsemble ParticleEnsemble::from_positions(std::vector<double> x0) {
    ParticleEnsemble e;
    const std::size_t n = x0.size();
    e.initial = x0;
    e.positions = std::move(x0);
    e.alive.assign(n, 1);
    e.clamped.assign(n, 0);
    e.stop_time.assign(n, kUnstopped);
    return e;
}

ParticleEnsemble ParticleEnsemble::from_quantiles(const InitialDensity& rho0, std::size_t count) {
    return from_positions(rho0.quantiles(count));
}

std::size_t ParticleEnsemble::alive_count() const {
    return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), char{1}));
}

double ParticleEnsemble::alive_fraction() const {
    return size() == 0 ? 0.0 : static_cast<double>(alive_count()) / static_cast<double>(size());
}

std::vector<double> ParticleEnsemble::alive_positions() const {
    std::vector<double> out;
    out.reserve(alive_count());
    for (std::size_t i = 0; i < size(); ++i)
        if (alive[i]) out.push_back(positions[i]);
    return out;
}

namespace {

double rk4(const VelocityField& v, double t, double x, double h) {
    const double k1 = v.at(t, x);
    const double k2 = v.at(t + 0.5 * h, x + 0.5 * h * k1);
    const double k3 = v.at(t + 0.5 * h, x + 0.5 * h * k2);
    const double k4 = v.at(t + h, x + h * k3);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

void advect_step(ParticleEnsemble& e, const VelocityField& velocity, const StopRule& rule, double t, double dt,
                 int jobs) {
    const double x_lo = velocity.grid.x_min();
    const double x_hi = velocity.grid.x_max();
    parallel_for(e.size(), jobs, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            if (!e.alive[p]) continue;
            double h = dt;
            bool reaches_tau = false;
            if (rule.time_assignment) {
                const double tau = (*rule.time_assignment)(e.initial[p]);
                if (tau <= t) {
                    e.alive[p] = 0;
                    e.stop_time[p] = t;
                    continue;
                }
                if (tau < t + dt) {
                    h = tau - t;
                    reaches_tau = true;
                }
            }
            const double x = e.positions[p];
            double x_new = rk4(velocity, t, x, h);
            if (x_new < x_lo || x_new > x_hi) {
                x_new = std::clamp(x_new, x_lo, x_hi);
                e.clamped[p] = 1;
            }
            if (rule.boundary.active()) {
                const double l0 = rule.boundary.level(t, x);
                const double l1 = rule.boundary.level(t + h, x_new);
                if (l1 >= 0.0) {
                    const double theta = l0 < 0.0 ? l0 / (l0 - l1) : 0.0;
                    e.positions[p] = x + theta * (x_new - x);
                    e.stop_time[p] = t + theta * h;
                    e.alive[p] = 0;
                    continue;
                }
            }
            e.positions[p] = x_new;
            if (reaches_tau) {
                e.alive[p] = 0;
                e.stop_time[p] = t + h;
            }
        }
    });
}

void advect_particles(ParticleEnsemble& ensemble, const VelocityField& velocity, const StopRule& rule,
                      double t_start, double t_end, double dt, int jobs) {
    if (!(t_end > t_start)) return;
    const auto steps = static_cast<std::size_t>(std::ceil((t_end - t_start) / dt - 1e-9));
    const double h = (t_end - t_start) / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = t_start + static_cast<double>(k) * h;
        advect_step(ensemble, velocity, rule, t, h, jobs);
    }
}

double silverman_bandwidth(std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < 2) return 0.0;
    const double mean = pairwise_sum(sample) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (sample[i] - mean) * (sample[i] - mean);
    const double sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(n - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(i);
        return i + 1 < n ? (1.0 - w) * sorted[i] + w * sorted[i + 1] : sorted[i];
    };
    const double iqr = q(0.75) - q(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

Field pushforward_density(const ParticleEnsemble& e, const Grid1D& grid, std::optional<double> bandwidth) {
    const auto pos = e.alive_positions();
    if (pos.size() < 100) throw Error(ErrorKind::TooFewParticles, "need at least 100 alive particles");
    double h = bandwidth ? *bandwidth : silverman_bandwidth(pos);
    const double dx = grid.dx();
    if (!(h > 0.0)) h = dx;
    const std::size_t n = grid.size();
    const double w = 1.0 / static_cast<double>(e.size());

    std::vector<double> binned(n, 0.0);
    for (double x : pos) {
        const double s = std::clamp((x - grid.x_min()) / dx, 0.0, static_cast<double>(n - 1));
        auto i = static_cast<std::size_t>(s);
        if (i >= n - 1) i = n - 2;
        const double f = s - static_cast<double>(i);
        binned[i] += w * (1.0 - f);
        binned[i + 1] += w * f;
    }
    const auto reach = static_cast<std::size_t>(std::ceil(6.0 * h / dx));
    std::vector<double> kernel(reach + 1);
    double norm = 0.0;
    for (std::size_t d = 0; d <= reach; ++d) {
        const double z = static_cast<double>(d) * dx / h;
        kernel[d] = std::exp(-0.5 * z * z);
        norm += (d == 0 ? 1.0 : 2.0) * kernel[d];
    }
    for (double& k : kernel) k /= norm * dx;

    Field out(grid);
    for (std::size_t i = 0; i < n; ++i) {
        if (binned[i] == 0.0) continue;
        const std::size_t lo = i >= reach ? i - reach : 0;
        const std::size_t hi = std::min(n - 1, i + reach);
        for (std::size_t j = lo; j <= hi; ++j) out.values[j] += binned[i] * kernel[j > i ? j - i : i - j];
    }
    return out;
}

double ito_recovery_residual(const ProblemSpec& spec, const Feedback& u, const InitialDensity& rho0,
                             const MonotoneMap& g, const ItoRecoveryConfig& cfg) {
    const auto& xg = cfg.x_grid;
    const auto& tg = cfg.time_grid;

    double min_slope = std::numeric_limits<double>::infinity();
    int sign = 0;
    for (std::size_t i = 0; i < xg.size(); ++i) {
        const double d = g.first(xg.x(i));
        const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign)) throw Error(ErrorKind::NotMonotone, "map derivative changes sign on grid");
        sign = s;
        min_slope = std::min(min_slope, std::abs(d));
    }

    // (a) characteristics of the transformed dynamics, mapped through g
    const auto none = StoppingBoundary::none();
    const DensityPath path = solve_fp(spec, u, rho0, xg, tg, none);
    const VelocityField vel = build_velocity_field(spec, u, path, none);
    auto ens = ParticleEnsemble::from_quantiles(rho0, cfg.particles);
    advect_particles(ens, vel, StopRule{}, tg.t0(), tg.t1(), tg.dt(), cfg.jobs);
    std::vector<double> mapped(ens.size());
    for (std::size_t p = 0; p < ens.size(); ++p) mapped[p] = g.value(ens.positions[p]);

    // (b) Fokker-Planck of the Ito image SDE on a y grid covering the occupied x range
    const Field& first = path.frames.front();
    const Field& last = path.frames.back();
    double peak = 0.0;
    for (std::size_t i = 0; i < xg.size(); ++i) peak = std::max({peak, first.values[i], last.values[i]});
    std::size_t lo = xg.size(), hi = 0;
    for (std::size_t i = 0; i < xg.size(); ++i) {
        if (std::max(first.values[i], last.values[i]) >= 1e-14 * peak) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    const double span = xg.x(hi) - xg.x(lo);
    const double xa = std::max(xg.x_min(), xg.x(lo) - 0.1 * span);
    const double xb = std::min(xg.x_max(), xg.x(hi) + 0.1 * span);
    const double ya = std::min(g.value(xa), g.value(xb));
    const double yb = std::max(g.value(xa), g.value(xb));
    std::size_t ny = cfg.y_points;
    if (ny == 0) ny = static_cast<std::size_t>(std::ceil((yb - ya) / (min_slope * xg.dx()))) + 1;
    const Grid1D yg(ya, yb, std::max<std::size_t>(ny, 3));

    std::vector<double> x_of_y(yg.size());
    for (std::size_t j = 0; j < yg.size(); ++j) {
        const double y = yg.x(j);
        if (j == 0) x_of_y[j] = sign > 0 ? xa : xb;
        else if (j + 1 == yg.size()) x_of_y[j] = sign > 0 ? xb : xa;
        else x_of_y[j] = find_root([&](double x) { return g.value(x) - y; }, xa, xb, 1e-13);
    }
    Field varpi(yg);
    for (std::size_t j = 0; j < yg.size(); ++j) {
        const double x = x_of_y[j];
        varpi.values[j] = rho0(x) / std::abs(g.first(x));
    }
    const double mass0 = trapezoid(varpi);
    for (double& v : varpi.values) v /= mass0;

    std::vector<double> drift(yg.size()), diff(yg.size());
    for (std::size_t k = 0; k < tg.steps(); ++k) {
        const double t_new = tg.t(k + 1);
        const double sigma = spec.diffusion(t_new);
        for (std::size_t j = 0; j < yg.size(); ++j) {
            const double x = x_of_y[j];
            const double d1 = g.first(x);
            drift[j] = d1 * spec.drift(t_new, x, u(t_new, x)) + 0.5 * sigma * sigma * g.second(x);
            diff[j] = 0.5 * d1 * d1 * sigma * sigma;
        }
        varpi = fp_step_variable(varpi, drift, diff, t_new - tg.t(k));
    }
    return wasserstein1(mapped, varpi);
}

}  // namespace dsteer
