#include "dsteer/model.hpp"

#include "dsteer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace dsteer {

Feedback zero_feedback() {
    return [](double, double) { return 0.0; };
}

double eval_drift(const ProblemSpec& spec, double t, double x, double u) { return spec.drift(t, x, u); }

namespace {

double checked(double v) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteEvaluation, "non-finite value in finite-difference probe");
    return v;
}

}  // namespace

double default_fd_step(PartialTag which, double t, double x, double u) {
    double arg = x;
    switch (which) {
        case PartialTag::DriftDu:
        case PartialTag::RunningCostDu: arg = u; break;
        case PartialTag::TerminalCostDt:
        case PartialTag::ConstraintDt: arg = t; break;
        default: break;
    }
    return 1e-5 * std::max(1.0, std::abs(arg));
}

double finite_diff_partials(const ProblemSpec& spec, PartialTag which, double t, double x, double u, double h) {
    if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be positive");
    auto central = [h](const auto& f) { return (checked(f(+h)) - checked(f(-h))) / (2.0 * h); };
    switch (which) {
        case PartialTag::DriftDu: return central([&](double e) { return spec.drift(t, x, u + e); });
        case PartialTag::DriftDx: return central([&](double e) { return spec.drift(t, x + e, u); });
        case PartialTag::RunningCostDu: return central([&](double e) { return spec.running_cost(t, x, u + e); });
        case PartialTag::RunningCostDx: return central([&](double e) { return spec.running_cost(t, x + e, u); });
        case PartialTag::TerminalCostDx: return central([&](double e) { return spec.terminal_cost(t, x + e); });
        case PartialTag::TerminalCostDt: return central([&](double e) { return spec.terminal_cost(t + e, x); });
        case PartialTag::ConstraintDx:
            if (!spec.constraint) return 0.0;
            return central([&](double e) { return spec.constraint(t, x + e); });
        case PartialTag::ConstraintDt:
            if (!spec.constraint) return 0.0;
            return central([&](double e) { return spec.constraint(t + e, x); });
    }
    return 0.0;
}

double partial(const ProblemSpec& spec, PartialTag which, double t, double x, double u) {
    switch (which) {
        case PartialTag::DriftDu:
            if (spec.drift_du) return spec.drift_du(t, x, u);
            break;
        case PartialTag::DriftDx:
            if (spec.drift_dx) return spec.drift_dx(t, x, u);
            break;
        case PartialTag::RunningCostDu:
            if (spec.running_cost_du) return spec.running_cost_du(t, x, u);
            break;
        case PartialTag::RunningCostDx:
            if (spec.running_cost_dx) return spec.running_cost_dx(t, x, u);
            break;
        case PartialTag::TerminalCostDx:
            if (spec.terminal_cost_dx) return spec.terminal_cost_dx(t, x);
            break;
        case PartialTag::TerminalCostDt:
            if (spec.terminal_cost_dt) return spec.terminal_cost_dt(t, x);
            break;
        case PartialTag::ConstraintDx:
            if (!spec.constraint) return 0.0;
            if (spec.constraint_dx) return spec.constraint_dx(t, x);
            break;
        case PartialTag::ConstraintDt:
            if (!spec.constraint) return 0.0;
            if (spec.constraint_dt) return spec.constraint_dt(t, x);
            break;
    }
    return finite_diff_partials(spec, which, t, x, u, default_fd_step(which, t, x, u));
}

StoppingBoundary StoppingBoundary::none() { return {}; }

StoppingBoundary StoppingBoundary::level_set(SpaceTimeMap g) {
    StoppingBoundary b;
    b.kind_ = Kind::LevelSet;
    b.g_ = std::move(g);
    return b;
}

StoppingBoundary StoppingBoundary::stop_below(TimeMap lo) {
    StoppingBoundary b;
    b.kind_ = Kind::StopBelow;
    b.lo_ = std::move(lo);
    return b;
}

StoppingBoundary StoppingBoundary::stop_above(TimeMap hi) {
    StoppingBoundary b;
    b.kind_ = Kind::StopAbove;
    b.hi_ = std::move(hi);
    return b;
}

StoppingBoundary StoppingBoundary::interval(TimeMap lo, TimeMap hi) {
    StoppingBoundary b;
    b.kind_ = Kind::Interval;
    b.lo_ = std::move(lo);
    b.hi_ = std::move(hi);
    return b;
}

double StoppingBoundary::level(double t, double x) const {
    switch (kind_) {
        case Kind::None: return -1.0;
        case Kind::LevelSet: return g_(t, x);
        case Kind::StopBelow: return lo_(t) - x;
        case Kind::StopAbove: return x - hi_(t);
        case Kind::Interval: return std::max(lo_(t) - x, x - hi_(t));
    }
    return -1.0;
}

bool inside_continuation(const StoppingBoundary& b, double t, double x) { return b.level(t, x) < 0.0; }

TimeAssignment TimeAssignment::common(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw Error(ErrorKind::InvalidArgument, "time assignment must be finite and nonnegative");
    TimeAssignment a;
    a.kind_ = Kind::Common;
    a.tau_ = tau;
    return a;
}

TimeAssignment TimeAssignment::per_initial(std::function<double(double)> tau) {
    TimeAssignment a;
    a.kind_ = Kind::PerInitialCondition;
    a.map_ = std::move(tau);
    return a;
}

InitialDensity InitialDensity::gaussian(double mean, double stddev, double half_width_sd) {
    InitialDensity d;
    const double norm = 1.0 / (stddev * std::sqrt(2.0 * std::numbers::pi));
    d.density = [mean, stddev, norm](double x) {
        const double z = (x - mean) / stddev;
        return norm * std::exp(-0.5 * z * z);
    };
    d.support_lo = mean - half_width_sd * stddev;
    d.support_hi = mean + half_width_sd * stddev;
    d.mean = mean;
    d.variance = stddev * stddev;
    return d;
}

InitialDensity InitialDensity::uniform(double lo, double hi) {
    InitialDensity d;
    const double h = 1.0 / (hi - lo);
    d.density = [h](double) { return h; };
    d.support_lo = lo;
    d.support_hi = hi;
    d.mean = 0.5 * (lo + hi);
    d.variance = (hi - lo) * (hi - lo) / 12.0;
    return d;
}

double InitialDensity::total_mass() const {
    const Grid1D g(support_lo, support_hi, 20001);
    return trapezoid(Field::sample(g, [this](double x) { return (*this)(x); }));
}

std::vector<double> InitialDensity::quantiles(std::size_t count) const {
    const InverseCdf inv(*this);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = inv((static_cast<double>(i) + 0.5) / static_cast<double>(count));
    return out;
}

InverseCdf::InverseCdf(const InitialDensity& rho, std::size_t nodes) {
    const Grid1D g(rho.support_lo, rho.support_hi, nodes);
    x_ = g.nodes();
    std::vector<double> pdf(nodes);
    for (std::size_t i = 0; i < nodes; ++i) pdf[i] = std::max(0.0, rho(x_[i]));
    cdf_ = cumulative_trapezoid(pdf, g.dx());
    const double total = cdf_.back();
    if (!(total > 0.0)) throw Error(ErrorKind::MassDeficit, "initial density has no mass");
    for (double& c : cdf_) c /= total;
}

double InverseCdf::operator()(double p) const {
    p = std::clamp(p, 0.0, 1.0);
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), p);
    if (it == cdf_.begin()) return x_.front();
    if (it == cdf_.end()) return x_.back();
    const auto i = static_cast<std::size_t>(it - cdf_.begin());
    const double c0 = cdf_[i - 1], c1 = cdf_[i];
    const double w = c1 > c0 ? (p - c0) / (c1 - c0) : 0.0;
    return x_[i - 1] + w * (x_[i] - x_[i - 1]);
}

}  // namespace dsteer
