#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rmtcluster {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// handled exactly once; callers write results into per-index slots so the
// outcome does not depend on scheduling. The first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned w = workers == 0 ? hw : workers;
    w = static_cast<unsigned>(std::min<std::size_t>(w, n));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += w) {
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (failure) return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace rmtcluster
