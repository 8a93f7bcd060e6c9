// parallel.hpp — index-ordered worker pool for independent grid points

#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace phasediff {

// Worker count resolution: explicit request > PHASEDIFF_WORKERS > hardware
inline int resolve_workers(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("PHASEDIFF_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<int>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Apply fn(i) for i in [0, count); results land at their own index, so the
// output order never depends on scheduling. The first exception is rethrown
// after all workers join.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t count, int workers, Fn&& fn) {
    std::vector<T> results(count);
    workers = std::max(1, std::min<int>(workers, static_cast<int>(count ? count : 1)));
    if (workers == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    results[i] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

} // namespace phasediff
