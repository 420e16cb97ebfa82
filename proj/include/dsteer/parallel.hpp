#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace dsteer {

/// Worker count: explicit value if positive, else DENSITY_STEER_JOBS, else 1.
int resolve_jobs(int requested);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunking depends only
/// on n and jobs, and callers write results by index, so output is independent
/// of scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t, std::size_t)>& body);

/// Pairwise (cascade) summation; order-independent of worker count.
double pairwise_sum(std::span<const double> values);

}  // namespace dsteer
