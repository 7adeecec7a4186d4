#pragma once

#include <cstddef>
#include <functional>

namespace relay {

// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency).
// Work items must be independent; callers that need determinism write
// results into per-index slots so the schedule cannot matter.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

int default_worker_count();

}  // namespace relay
