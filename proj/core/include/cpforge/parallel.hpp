#pragma once

#include <cstddef>
#include <functional>

namespace cpforge {

/// Worker count: hardware concurrency capped by CPFORGE_THREADS when set.
std::size_t worker_count();

/// Splits [0, n) into contiguous chunks, one per worker, and runs
/// body(chunk_index, begin, end). Chunk boundaries depend only on n and the
/// worker count, so callers that reduce per-chunk results in chunk order get
/// deterministic output.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                     std::size_t max_chunks = 0);

/// Number of chunks parallel_chunks will use for n items.
std::size_t chunk_count(std::size_t n, std::size_t max_chunks = 0);

}  // namespace cpforge
