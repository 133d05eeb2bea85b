#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace metrol {

/// Runs fn(i) for i in [0, count) on at most `workers` threads. Indices are handed
/// out from a shared counter; the exception thrown by fn(i), if any, is stored at
/// position i of the returned vector so callers can report per-point failures.
template <class Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t count, int workers, Fn&& fn) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    const auto drain = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
    if (threads <= 1) {
        drain();
        return errors;
    }
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(drain);
    }
    return errors;
}

}  // namespace metrol
