#pragma once

#include "dsteer/diagnostics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dsteer {

/// Perpetual American put: exercise below b*, V(S) = (K - b*)(S / b*)^(-gamma) above.
struct PutOracle {
    double rate = 0.0;
    double sigma = 0.0;
    double strike = 0.0;
    double gamma = 0.0;  // 2 r / sigma^2
    double boundary = 0.0;

    double value(double s) const;
    double derivative(double s) const;
};

/// b* from the smooth-pasting condition gamma (K - b) / b = 1, solved by bracketing.
PutOracle american_put_oracle(double r, double sigma, double strike);

/// Closed form 2 r K / (2 r + sigma^2), for cross-checking the root.
double american_put_boundary_closed_form(double r, double sigma, double strike);

/// Root of (1 - B^2) sqrt(2 pi) exp(B^2 / 2) Phi(B) = B on (0.5, 1): the scale of
/// the optimal stopping boundary B sqrt(1 - t) of a Brownian bridge pinned at t = 1.
double brownian_bridge_oracle();

/// Scalar LQ: dx = (A x + B u) dt + sigma dw, L = (Q x^2 + R u^2) / 2, Phi = Qf x^2 / 2.
struct RiccatiOracle {
    double a = 0.0, b = 0.0, q = 0.0, r = 1.0, qf = 0.0, horizon = 1.0, sigma = 0.0;
    double dt = 1e-4;
    std::vector<double> p;       // P at t = k dt
    std::vector<double> offset;  // c with V = P x^2 / 2 + c

    double P(double t) const;
    double gain(double t) const { return -b * P(t) / r; }
    double feedback(double t, double x) const { return gain(t) * x; }
    double value(double t, double x) const;
    /// lambda = V_x = P x.
    double costate(double t, double x) const { return P(t) * x; }
};

/// Backward RK4 for P' = -2 A P + B^2 P^2 / R - Q, P(T) = Qf, at dt = 1e-4.
RiccatiOracle lq_riccati_oracle(double a, double b, double q, double r, double qf, double horizon, double sigma = 0.0);

/// LQ with E[x_T] = target: lambda = P x + beta(t), beta(T) = -eta, mean m' = A m - B^2 (P m + beta) / R.
struct MeanConstraintOracle {
    double eta = 0.0;
    double mean_at_horizon = 0.0;
    double beta0 = 0.0;  // beta(0)
};

MeanConstraintOracle lq_mean_constraint_oracle(double a, double b, double q, double r, double qf, double horizon,
                                               double mean0, double target);

struct BenchConfig {
    double tol_scale = 1.0;
    int jobs = 1;
    std::uint64_t seed = 1;
};

/// american_put, brownian_bridge, lq_steer.
std::vector<std::string> benchmark_names();
std::vector<CheckReport> run_benchmark(const std::string& name, const BenchConfig& cfg = {});

/// stein, marginal, deterministic, absorbing, ito, decomposition, duality.
std::vector<std::string> check_names();
std::vector<CheckReport> run_check(const std::string& name, const BenchConfig& cfg = {});

}  // namespace dsteer
