#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dsteer {

/// Uniform 1-D spatial grid with n >= 3 nodes on [x_min, x_max].
class Grid1D {
public:
    Grid1D() = default;
    Grid1D(double x_min, double x_max, std::size_t n);

    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    std::size_t size() const noexcept { return n_; }
    double dx() const noexcept { return dx_; }
    double x(std::size_t i) const noexcept { return x_min_ + static_cast<double>(i) * dx_; }
    std::vector<double> nodes() const;

    /// Grid with spacing as close as possible to `dx` (rounded to an integer node count).
    static Grid1D with_spacing(double x_min, double x_max, double dx);

    bool operator==(const Grid1D&) const = default;

private:
    double x_min_ = 0.0;
    double x_max_ = 1.0;
    std::size_t n_ = 3;
    double dx_ = 0.5;
};

/// Uniform time grid t0 < t1 with `steps` intervals.
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double t0, double t1, std::size_t steps);

    double t0() const noexcept { return t0_; }
    double t1() const noexcept { return t1_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    double t(std::size_t k) const noexcept { return k == steps_ ? t1_ : t0_ + static_cast<double>(k) * dt_; }

    static TimeGrid with_step(double t0, double t1, double dt);

    bool operator==(const TimeGrid&) const = default;

private:
    double t0_ = 0.0;
    double t1_ = 1.0;
    std::size_t steps_ = 1;
    double dt_ = 1.0;
};

/// Grid-sampled real field.
struct Field {
    Grid1D grid;
    std::vector<double> values;

    Field() = default;
    Field(Grid1D g, std::vector<double> v);
    explicit Field(Grid1D g, double fill = 0.0);

    static Field sample(const Grid1D& g, const std::function<double(double)>& f);

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const noexcept { return values[i]; }
    double& operator[](std::size_t i) noexcept { return values[i]; }
    double max_abs() const noexcept;
};

/// Central differences inside, second-order one-sided at both ends.
Field gradient_central(const Field& f);

/// Three-point stencil inside; four-point one-sided second-order at the ends.
Field second_derivative(const Field& f);

double trapezoid(const Field& f);
double trapezoid(std::span<const double> values, double dx);

/// Running trapezoid integral, starting at zero at the first node.
std::vector<double> cumulative_trapezoid(std::span<const double> values, double dx);

struct Interpolated {
    double value;
    bool out_of_range;
};

/// Piecewise-linear interpolation; outside the grid the boundary value is
/// returned with the out-of-range flag set.
Interpolated interp_linear(const Field& f, double x);

/// Four-point Lagrange interpolation (linear in the first and last cell), clamped outside.
double interp_cubic(const Field& f, double x);

/// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are ignored.
/// Returns the solution; `diag` must be nonzero after elimination.
std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs);

/// Brent root finding on [a, b]; throws RootNotBracketed when f(a), f(b) share a sign.
double find_root(const std::function<double(double)>& f, double a, double b, double tol = 1e-13,
                 int max_iter = 200);

}  // namespace dsteer
