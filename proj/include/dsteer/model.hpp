#pragma once

#include "dsteer/grid.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dsteer {

using StateMap = std::function<double(double t, double x, double u)>;
using SpaceTimeMap = std::function<double(double t, double x)>;
using TimeMap = std::function<double(double t)>;

/// Closed-form structure f = a(t,x) + b(t,x) u and L = l(t,x) + r(t,x) u^2 / 2.
/// When present, pointwise control minimization is done analytically.
struct ControlAffineQuadratic {
    SpaceTimeMap input_gain;     // b
    SpaceTimeMap control_weight; // r > 0
};

/// Controlled 1-D diffusion dx = f dt + sigma_t dw with Bolza cost and an optional
/// terminal distribution constraint E[Psi] = 0. Immutable once built; every map
/// must be pure so solvers may evaluate it from several threads.
struct ProblemSpec {
    std::string name;

    StateMap drift;
    TimeMap diffusion;  // sigma_t > 0
    StateMap running_cost;
    SpaceTimeMap terminal_cost;
    SpaceTimeMap constraint;  // optional; empty means no constraint

    int control_dim = 1;
    double control_min = -1e300;
    double control_max = 1e300;
    /// Exponential discount (killing) rate applied to costs; zero for the plain Bolza cost.
    double discount = 0.0;

    std::optional<ControlAffineQuadratic> affine_quadratic;

    // Optional analytic partials; finite differences are used when absent.
    StateMap drift_du;
    StateMap drift_dx;
    StateMap running_cost_du;
    StateMap running_cost_dx;
    SpaceTimeMap terminal_cost_dx;
    SpaceTimeMap terminal_cost_dt;
    SpaceTimeMap constraint_dx;
    SpaceTimeMap constraint_dt;

    bool has_constraint() const noexcept { return static_cast<bool>(constraint); }
    double half_sigma_sq(double t) const {
        const double s = diffusion(t);
        return 0.5 * s * s;
    }
};

/// Feedback law u(t, x).
using Feedback = std::function<double(double t, double x)>;

Feedback zero_feedback();

double eval_drift(const ProblemSpec& spec, double t, double x, double u);

enum class PartialTag {
    DriftDu,
    DriftDx,
    RunningCostDu,
    RunningCostDx,
    TerminalCostDx,
    TerminalCostDt,
    ConstraintDx,
    ConstraintDt,
};

/// Central-difference partial with step h; throws NonFiniteEvaluation on a
/// non-finite probe.
double finite_diff_partials(const ProblemSpec& spec, PartialTag which, double t, double x, double u, double h);

/// Default step 1e-5 * max(1, |arg|) for the differentiated argument.
double default_fd_step(PartialTag which, double t, double x, double u);

/// Analytic partial when supplied, else the finite-difference fallback.
double partial(const ProblemSpec& spec, PartialTag which, double t, double x, double u = 0.0);

/// Stopping boundary. The continuation (alive) region is where level(t, x) < 0.
class StoppingBoundary {
public:
    enum class Kind { None, LevelSet, StopBelow, StopAbove, Interval };

    static StoppingBoundary none();
    /// Continuation region {g(t, x) < 0}.
    static StoppingBoundary level_set(SpaceTimeMap g);
    /// Stopped when x <= b(t).
    static StoppingBoundary stop_below(TimeMap b);
    /// Stopped when x >= b(t).
    static StoppingBoundary stop_above(TimeMap b);
    /// Alive on the open interval (lo(t), hi(t)).
    static StoppingBoundary interval(TimeMap lo, TimeMap hi);

    Kind kind() const noexcept { return kind_; }
    bool active() const noexcept { return kind_ != Kind::None; }

    /// Signed level: negative inside the continuation region.
    double level(double t, double x) const;

    const TimeMap& lower() const noexcept { return lo_; }
    const TimeMap& upper() const noexcept { return hi_; }

private:
    Kind kind_ = Kind::None;
    SpaceTimeMap g_;
    TimeMap lo_;
    TimeMap hi_;
};

bool inside_continuation(const StoppingBoundary& b, double t, double x);

/// Final-time rule: a common scalar or a per-initial-condition map x0 -> tau(x0).
class TimeAssignment {
public:
    enum class Kind { Common, PerInitialCondition };

    static TimeAssignment common(double tau);
    static TimeAssignment per_initial(std::function<double(double x0)> tau);

    Kind kind() const noexcept { return kind_; }
    double operator()(double x0) const { return kind_ == Kind::Common ? tau_ : map_(x0); }

private:
    Kind kind_ = Kind::Common;
    double tau_ = 0.0;
    std::function<double(double)> map_;
};

/// Initial density on a compact support with optional known moments.
struct InitialDensity {
    std::function<double(double)> density;
    double support_lo = 0.0;
    double support_hi = 1.0;
    std::optional<double> mean;
    std::optional<double> variance;

    static InitialDensity gaussian(double mean, double stddev, double half_width_sd = 12.0);
    static InitialDensity uniform(double lo, double hi);

    double operator()(double x) const {
        return (x < support_lo || x > support_hi) ? 0.0 : density(x);
    }

    /// Mass on the support under a 20001-node trapezoid rule.
    double total_mass() const;

    /// Mid-point quantiles x((i + 1/2) / count), i = 0..count-1.
    std::vector<double> quantiles(std::size_t count) const;
};

/// Tabulated inverse CDF of an InitialDensity (piecewise-linear CDF).
class InverseCdf {
public:
    explicit InverseCdf(const InitialDensity& rho, std::size_t nodes = 20001);

    double operator()(double p) const;

private:
    std::vector<double> x_;
    std::vector<double> cdf_;
};

}  // namespace dsteer
