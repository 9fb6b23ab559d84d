#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vhs {

inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
// The first exception thrown by any job is rethrown after all threads join.
template <class F>
void parallel_for(std::size_t count, std::size_t workers, F&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (!error) error = std::current_exception();
                    }
                }
            });
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace vhs
