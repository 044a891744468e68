#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace epose::util {

// Worker count: EPOSE_THREADS if set, else hardware concurrency, at least 1.
int thread_count();

// Runs fn(chunk, begin, end) over a fixed chunking of [0, n). Chunk
// boundaries depend only on n and num_chunks, never on the worker count,
// so per-chunk results can be reduced in chunk order for bit-stable output.
void parallel_chunks(std::size_t n, std::size_t num_chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Convenience: one item per task, chunk count picked from thread count.
void parallel_items(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace epose::util
