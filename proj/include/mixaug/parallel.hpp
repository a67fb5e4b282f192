#pragma once

#include <cstddef>
#include <functional>

namespace mixaug {

// Worker cap shared by batch-parallel code paths. Defaults to the MIXAUG_THREADS
// environment variable when set, otherwise the hardware concurrency.
std::size_t max_workers();
void set_max_workers(std::size_t workers);

// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, total).
// Chunk boundaries depend only on `total` and `chunk`, never on the worker
// count, so per-chunk results merged in chunk order are deterministic.
void parallel_chunks(std::size_t total, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace mixaug
