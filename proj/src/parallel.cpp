#include "mixaug/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace mixaug {

namespace {

std::size_t initial_workers() {
    if (const char* env = std::getenv("MIXAUG_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1;
}

std::size_t g_max_workers = initial_workers();

}  // namespace

std::size_t max_workers() { return g_max_workers; }

void set_max_workers(std::size_t workers) { g_max_workers = workers ? workers : 1; }

void parallel_chunks(std::size_t total, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (total == 0) return;
    if (chunk == 0) chunk = 1;
    const std::size_t nchunks = (total + chunk - 1) / chunk;
    const std::size_t workers = std::min(max_workers(), nchunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) {
            fn(c, c * chunk, std::min(total, (c + 1) * chunk));
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= nchunks || failed.load()) return;
            try {
                fn(c, c * chunk, std::min(total, (c + 1) * chunk));
            } catch (...) {
                if (!failed.exchange(true)) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mixaug
