#pragma once

#include <cstddef>
#include <functional>

namespace tdet {

// Worker cap: TDET_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
int worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Callers write
// results into per-index slots, so the merge order never depends on
// scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tdet
