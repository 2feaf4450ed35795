#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace collider_lab {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work items
/// are claimed dynamically, so body must not depend on execution order. The
/// first exception thrown by any item is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

/// Splits [0, n) into `parts` contiguous ranges and runs body(begin, end) on each.
template <class Body>
void parallel_ranges(std::size_t n, std::size_t parts, Body&& body) {
    parts = std::max<std::size_t>(1, std::min(parts, n == 0 ? 1 : n));
    parallel_for(parts, parts, [&](std::size_t p) {
        const std::size_t begin = n * p / parts;
        const std::size_t end = n * (p + 1) / parts;
        body(begin, end);
    });
}

/// Thread count from COLLIDER_LAB_THREADS, or 1.
inline std::size_t default_thread_count() {
    if (const char* env = std::getenv("COLLIDER_LAB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return 1;
}

}  // namespace collider_lab
