#pragma once

#include <cstddef>
#include <functional>

namespace topotext {

/// Worker count for batch work: `TOPOTEXT_THREADS` if set and positive,
/// otherwise the hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for every i in [0, n). Indices are split into contiguous
/// chunks, one per worker; callers write results by index so output order
/// never depends on scheduling. The first exception thrown by any worker is
/// rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t max_workers = 0);

}  // namespace topotext
