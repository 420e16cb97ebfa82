#include "dsteer/grid.hpp"

#include "dsteer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace dsteer {

Grid1D::Grid1D(double x_min, double x_max, std::size_t n) : x_min_(x_min), x_max_(x_max), n_(n) {
    if (n < 3) throw Error(ErrorKind::InvalidArgument, "Grid1D needs at least 3 nodes");
    if (!(x_max > x_min)) throw Error(ErrorKind::InvalidArgument, "Grid1D needs x_max > x_min");
    dx_ = (x_max - x_min) / static_cast<double>(n - 1);
}

std::vector<double> Grid1D::nodes() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = x(i);
    return out;
}

Grid1D Grid1D::with_spacing(double x_min, double x_max, double dx) {
    if (!(dx > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid spacing must be positive");
    const auto cells = static_cast<std::size_t>(std::llround((x_max - x_min) / dx));
    return Grid1D(x_min, x_max, std::max<std::size_t>(cells, 2) + 1);
}

TimeGrid::TimeGrid(double t0, double t1, std::size_t steps) : t0_(t0), t1_(t1), steps_(steps) {
    if (steps == 0) throw Error(ErrorKind::InvalidArgument, "TimeGrid needs at least one step");
    if (!(t1 > t0)) throw Error(ErrorKind::InvalidArgument, "TimeGrid needs t1 > t0");
    dt_ = (t1 - t0) / static_cast<double>(steps);
}

TimeGrid TimeGrid::with_step(double t0, double t1, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
    const auto steps = static_cast<std::size_t>(std::llround((t1 - t0) / dt));
    return TimeGrid(t0, t1, std::max<std::size_t>(steps, 1));
}

Field::Field(Grid1D g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) throw Error(ErrorKind::InvalidArgument, "field length does not match grid");
}

Field::Field(Grid1D g, double fill) : grid(std::move(g)), values(grid.size(), fill) {}

Field Field::sample(const Grid1D& g, const std::function<double(double)>& f) {
    Field out(g);
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g.x(i));
    return out;
}

double Field::max_abs() const noexcept {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

Field gradient_central(const Field& f) {
    const std::size_t n = f.size();
    const double h = f.grid.dx();
    const auto& v = f.values;
    Field out(f.grid);
    for (std::size_t i = 1; i + 1 < n; ++i) out.values[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    out.values[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    out.values[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    return out;
}

Field second_derivative(const Field& f) {
    const std::size_t n = f.size();
    const double h2 = f.grid.dx() * f.grid.dx();
    const auto& v = f.values;
    Field out(f.grid);
    for (std::size_t i = 1; i + 1 < n; ++i) out.values[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
    if (n >= 4) {
        out.values[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
        out.values[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    } else {
        out.values[0] = out.values[1];
        out.values[n - 1] = out.values[n - 2];
    }
    return out;
}

double trapezoid(std::span<const double> values, double dx) {
    if (values.size() < 2) return 0.0;
    double s = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
    return s * dx;
}

double trapezoid(const Field& f) { return trapezoid(f.values, f.grid.dx()); }

std::vector<double> cumulative_trapezoid(std::span<const double> values, double dx) {
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t i = 1; i < values.size(); ++i) out[i] = out[i - 1] + 0.5 * dx * (values[i - 1] + values[i]);
    return out;
}

Interpolated interp_linear(const Field& f, double x) {
    const auto& g = f.grid;
    if (x <= g.x_min()) return {f.values.front(), x < g.x_min()};
    if (x >= g.x_max()) return {f.values.back(), x > g.x_max()};
    const double s = (x - g.x_min()) / g.dx();
    auto i = static_cast<std::size_t>(s);
    if (i >= g.size() - 1) i = g.size() - 2;
    const double w = s - static_cast<double>(i);
    if (w == 0.0) return {f.values[i], false};
    return {(1.0 - w) * f.values[i] + w * f.values[i + 1], false};
}

double interp_cubic(const Field& f, double x) {
    const auto& g = f.grid;
    const std::size_t n = g.size();
    if (x <= g.x_min()) return f.values.front();
    if (x >= g.x_max()) return f.values.back();
    const double s = (x - g.x_min()) / g.dx();
    auto i = static_cast<std::size_t>(s);
    if (i >= n - 1) i = n - 2;
    const double w = s - static_cast<double>(i);
    const auto& v = f.values;
    if (i == 0 || i + 2 >= n) return (1.0 - w) * v[i] + w * v[i + 1];
    // Lagrange weights on nodes i-1, i, i+1, i+2 at offset w from node i
    const double wm = -w * (w - 1.0) * (w - 2.0) / 6.0;
    const double w0 = (w + 1.0) * (w - 1.0) * (w - 2.0) / 2.0;
    const double w1 = -(w + 1.0) * w * (w - 2.0) / 2.0;
    const double w2 = (w + 1.0) * w * (w - 1.0) / 6.0;
    return wm * v[i - 1] + w0 * v[i] + w1 * v[i + 1] + w2 * v[i + 2];
}

std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n), d(n), x(n);
    double denom = diag[0];
    c[0] = n > 1 ? upper[0] / denom : 0.0;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = i + 1 < n ? upper[i] / denom : 0.0;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

double find_root(const std::function<double(double)>& f, double a, double b, double tol, int max_iter) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0)) throw Error(ErrorKind::RootNotBracketed, "root not bracketed");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 2.0 * 1e-16 * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
    }
    return b;
}

}  // namespace dsteer
