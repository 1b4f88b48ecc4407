#pragma once

#include <cstddef>
#include <functional>

namespace mpsts {

/// Worker count: MPSTS_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
unsigned worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and chunk_size, so results written by index are
/// independent of scheduling.
void parallel_for(std::size_t n, std::size_t chunk_size, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mpsts
