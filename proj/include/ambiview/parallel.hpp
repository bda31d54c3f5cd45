#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ambiview {

/// Process-wide worker count used by the parallel loops. 0 means "hardware".
/// Only affects speed: every loop writes results by index.
inline std::size_t& default_thread_count() {
    static std::size_t n = 1;
    return n;
}

namespace detail {
inline thread_local bool in_parallel_worker = false;
}

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested == 0) {
        requested = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }
    return requested;
}

/// Calls fn(i) for i in [0, n) on contiguous blocks. The first exception
/// thrown by any worker is rethrown on the calling thread. Nested calls
/// from inside a worker run serially.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t threads = default_thread_count()) {
    threads = std::min(resolve_threads(threads), n);
    if (threads <= 1 || detail::in_parallel_worker) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(threads);
    const std::size_t block = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * block;
        const std::size_t end = std::min(n, begin + block);
        workers.emplace_back([&, begin, end] {
            detail::in_parallel_worker = true;
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    fn(i);
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace ambiview
