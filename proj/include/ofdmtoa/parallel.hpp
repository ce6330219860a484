#pragma once

#include <cstddef>
#include <functional>

namespace ofdmtoa {

/// Calls fn(i) for every i in [0, n) on up to `workers` threads. Each index runs exactly
/// once; callers write results into per-index slots so the outcome does not depend on
/// scheduling. After a failure no new indices start; the exception from the lowest failing index
/// is rethrown once all threads join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Hardware concurrency, at least 1.
int default_workers();

}  // namespace ofdmtoa
