#include "dsteer/sde_mc.hpp"

#include "dsteer/errors.hpp"
#include "dsteer/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dsteer {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632be59bd9b4e019ULL)));
}

// integral over [a, b] of |d(x)| for d linear from da to db
double abs_linear_integral(double da, double db, double width) {
    if ((da >= 0.0 && db >= 0.0) || (da <= 0.0 && db <= 0.0)) return 0.5 * (std::abs(da) + std::abs(db)) * width;
    return 0.5 * (da * da + db * db) / std::abs(db - da) * width;
}

std::vector<double> normalized_cdf(const Field& f) {
    std::vector<double> pdf(f.values.size());
    for (std::size_t i = 0; i < pdf.size(); ++i) pdf[i] = std::max(0.0, f.values[i]);
    auto cdf = cumulative_trapezoid(pdf, f.grid.dx());
    const double total = cdf.back();
    if (!(total > 0.0)) throw Error(ErrorKind::EmptyInput, "density has no mass");
    for (double& c : cdf) c /= total;
    return cdf;
}

double cdf_at(const Field& f, const std::vector<double>& cdf, double x) {
    const auto& g = f.grid;
    if (x <= g.x_min()) return 0.0;
    if (x >= g.x_max()) return 1.0;
    const double s = (x - g.x_min()) / g.dx();
    auto i = static_cast<std::size_t>(s);
    if (i >= g.size() - 1) i = g.size() - 2;
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * cdf[i] + w * cdf[i + 1];
}

}  // namespace

std::vector<double> McSnapshot::alive_positions() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < positions.size(); ++i)
        if (alive[i]) out.push_back(positions[i]);
    return out;
}

double McSnapshot::alive_fraction() const {
    if (alive.empty()) return 0.0;
    return static_cast<double>(std::count(alive.begin(), alive.end(), char{1})) / static_cast<double>(alive.size());
}

double McResult::survival() const {
    if (alive.empty()) return 0.0;
    return static_cast<double>(std::count(alive.begin(), alive.end(), char{1})) / static_cast<double>(alive.size());
}

std::vector<double> McResult::alive_final() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < x_final.size(); ++i)
        if (alive[i]) out.push_back(x_final[i]);
    return out;
}

McResult simulate_killed(const ProblemSpec& spec, const Feedback& u, const InitialDensity& rho0,
                         const StoppingBoundary& boundary, const McConfig& cfg,
                         const std::optional<TimeAssignment>& time_assignment) {
    if (cfg.n_paths == 0) throw Error(ErrorKind::InvalidArgument, "n_paths must be at least 1");
    if (!(cfg.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    const std::size_t n = cfg.n_paths;
    const double t0 = cfg.t0;
    const double horizon = cfg.horizon;
    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround((horizon - t0) / cfg.dt)));
    const double h = (horizon - t0) / static_cast<double>(steps);
    const double r = spec.discount;
    const InverseCdf inverse(rho0);

    std::vector<std::size_t> snap_steps;
    for (double s : cfg.snapshot_times)
        snap_steps.push_back(std::min(steps, static_cast<std::size_t>(std::llround((s - t0) / h))));

    McResult res;
    res.x_final.assign(n, 0.0);
    res.stop_time.assign(n, horizon);
    res.alive.assign(n, 1);
    res.cost.assign(n, 0.0);
    res.snapshots.resize(snap_steps.size());
    for (std::size_t s = 0; s < snap_steps.size(); ++s) {
        res.snapshots[s].t = t0 + static_cast<double>(snap_steps[s]) * h;
        res.snapshots[s].positions.assign(n, 0.0);
        res.snapshots[s].alive.assign(n, 0);
    }

    auto record = [&](std::size_t path, std::size_t step, double x, bool alive) {
        for (std::size_t s = 0; s < snap_steps.size(); ++s) {
            if (snap_steps[s] != step) continue;
            res.snapshots[s].positions[path] = x;
            res.snapshots[s].alive[path] = alive ? 1 : 0;
        }
    };

    parallel_for(n, cfg.jobs, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            auto rng = path_stream(cfg.seed, p);
            std::normal_distribution<double> normal(0.0, 1.0);
            std::uniform_real_distribution<double> uniform(0.0, 1.0);
            const double x0 = inverse(uniform(rng));
            const double tau = time_assignment ? std::min(horizon, (*time_assignment)(x0)) : horizon;

            double x = x0;
            double cost = 0.0;
            bool alive = true;
            double stop = horizon;
            if (boundary.active() && !inside_continuation(boundary, t0, x)) {
                alive = false;
                stop = t0;
            }
            record(p, 0, x, alive);
            for (std::size_t k = 0; k < steps && alive; ++k) {
                const double t = t0 + static_cast<double>(k) * h;
                if (t >= tau - 1e-12 * std::max(1.0, std::abs(tau))) {
                    stop = tau;
                    alive = false;
                    break;
                }
                const bool partial_step = tau - t < h * (1.0 - 1e-9);
                const double step = partial_step ? tau - t : h;
                const double uk = u(t, x);
                const double rate = spec.running_cost(t, x, uk) * (r > 0.0 ? std::exp(-r * t) : 1.0);
                const double xi = normal(rng);
                double x_new = x + spec.drift(t, x, uk) * step + spec.diffusion(t) * std::sqrt(step) * xi;
                if (boundary.active()) {
                    const double l0 = boundary.level(t, x);
                    const double l1 = boundary.level(t + step, x_new);
                    if (l1 >= 0.0) {
                        const double theta = l0 < 0.0 ? l0 / (l0 - l1) : 0.0;
                        cost += rate * theta * step;
                        x = x + theta * (x_new - x);
                        stop = t + theta * step;
                        alive = false;
                        break;
                    }
                    // excursion across the boundary between two alive endpoints
                    const double sig = spec.diffusion(t);
                    const double p_cross = std::exp(-2.0 * l0 * l1 / (sig * sig * step));
                    if (p_cross > 1e-14 && uniform(rng) < p_cross) {
                        const double eps = 1e-7 * std::max(1.0, std::abs(x));
                        const double slope = (boundary.level(t, x + eps) - boundary.level(t, x - eps)) / (2.0 * eps);
                        cost += rate * 0.5 * step;
                        if (slope != 0.0 && std::isfinite(slope)) x -= l0 / slope;
                        stop = t + 0.5 * step;
                        alive = false;
                        break;
                    }
                }
                cost += rate * step;
                x = x_new;
                if (partial_step) {
                    stop = tau;
                    alive = false;
                    break;
                }
                record(p, k + 1, x, true);
            }
            const double t_end = alive ? horizon : stop;
            cost += spec.terminal_cost(t_end, x) * (r > 0.0 ? std::exp(-r * t_end) : 1.0);
            res.x_final[p] = x;
            res.stop_time[p] = t_end;
            res.alive[p] = alive ? 1 : 0;
            res.cost[p] = cost;
        }
    });
    return res;
}

CostEstimate estimate_mean(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) throw Error(ErrorKind::EmptyInput, "no values");
    CostEstimate est;
    est.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n < 2) return est;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - est.mean) * (values[i] - est.mean);
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    est.standard_error = std::sqrt(var / static_cast<double>(n));
    return est;
}

CostEstimate estimate_cost(const McResult& result) { return estimate_mean(result.cost); }

double wasserstein1(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::EmptyInput, "W1 needs nonempty samples");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double wa = 1.0 / static_cast<double>(sa.size());
    const double wb = 1.0 / static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0, total = 0.0;
    double prev = std::min(sa.front(), sb.front());
    while (i < sa.size() || j < sb.size()) {
        const double next = (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) ? sa[i] : sb[j];
        total += std::abs(fa - fb) * (next - prev);
        while (i < sa.size() && sa[i] == next) {
            fa += wa;
            ++i;
        }
        while (j < sb.size() && sb[j] == next) {
            fb += wb;
            ++j;
        }
        prev = next;
    }
    return total;
}

double wasserstein1(std::span<const double> sample, const Field& density) {
    if (sample.empty()) throw Error(ErrorKind::EmptyInput, "W1 needs a nonempty sample");
    const auto cdf = normalized_cdf(density);
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    const auto& g = density.grid;
    std::vector<double> breaks = g.nodes();
    breaks.insert(breaks.end(), s.begin(), s.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    const double w = 1.0 / static_cast<double>(s.size());
    std::size_t j = 0;
    double fs = 0.0, total = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k], b = breaks[k + 1];
        while (j < s.size() && s[j] <= a) {
            fs += w;
            ++j;
        }
        total += abs_linear_integral(cdf_at(density, cdf, a) - fs, cdf_at(density, cdf, b) - fs, b - a);
    }
    return total;
}

double wasserstein1(const Field& a, const Field& b) {
    const auto ca = normalized_cdf(a);
    const auto cb = normalized_cdf(b);
    std::vector<double> breaks = a.grid.nodes();
    const auto nb = b.grid.nodes();
    breaks.insert(breaks.end(), nb.begin(), nb.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double x0 = breaks[k], x1 = breaks[k + 1];
        total += abs_linear_integral(cdf_at(a, ca, x0) - cdf_at(b, cb, x0), cdf_at(a, ca, x1) - cdf_at(b, cb, x1),
                                     x1 - x0);
    }
    return total;
}

}  // namespace dsteer
