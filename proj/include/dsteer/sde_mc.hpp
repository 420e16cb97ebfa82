#pragma once

#include "dsteer/grid.hpp"
#include "dsteer/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dsteer {

struct McConfig {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    double horizon = 1.0;
    double t0 = 0.0;
    int jobs = 1;
    /// Times at which alive positions are recorded.
    std::vector<double> snapshot_times;
};

struct McSnapshot {
    double t = 0.0;
    std::vector<double> positions;  // per path; meaningful only where alive
    std::vector<char> alive;

    std::vector<double> alive_positions() const;
    double alive_fraction() const;
};

struct McResult {
    std::vector<double> x_final;
    std::vector<double> stop_time;  // horizon for paths never stopped
    std::vector<char> alive;
    std::vector<double> cost;
    std::vector<McSnapshot> snapshots;

    std::size_t size() const noexcept { return x_final.size(); }
    double survival() const;
    std::vector<double> alive_final() const;
};

/// Euler-Maruyama with first-hitting-time killing. Each path draws from its own
/// stream seeded by (seed, path index), so results do not depend on the worker
/// count. A sign change of the boundary level within a step stops the path at
/// the linearly interpolated crossing; when both endpoints are alive the path
/// is still stopped with the Brownian-bridge crossing probability
/// exp(-2 l0 l1 / (sigma^2 dt)), l being the level at the two endpoints. Running cost uses the left-endpoint rule; the terminal
/// cost is charged at the stopping time, at tau(x0) when a time assignment is
/// given, or at the horizon otherwise.
McResult simulate_killed(const ProblemSpec& spec, const Feedback& u, const InitialDensity& rho0,
                         const StoppingBoundary& boundary, const McConfig& cfg,
                         const std::optional<TimeAssignment>& time_assignment = std::nullopt);

struct CostEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

CostEstimate estimate_cost(const McResult& result);
CostEstimate estimate_mean(std::span<const double> values);

/// 1-D W1 between two empirical samples (integral of |F_a - F_b|).
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// W1 between an empirical sample and a grid density normalized to unit mass;
/// the density CDF is the node-wise trapezoid integral, linear between nodes.
double wasserstein1(std::span<const double> sample, const Field& density);

/// W1 between two grid densities (possibly on different grids), each normalized.
double wasserstein1(const Field& a, const Field& b);

}  // namespace dsteer
