#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dpc {

// Runs fn(slice_index, begin, end) over [0, n) split into fixed-size slices.
// The slice decomposition depends only on (n, slice_size), never on the thread
// count, so callers that accumulate into per-slice buffers and reduce them in
// slice order get bit-identical results on any machine.
inline void parallel_slices(std::size_t n, std::size_t slice_size,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                            unsigned max_threads = 0) {
    if (n == 0) return;
    if (slice_size == 0) slice_size = 1;
    const std::size_t n_slices = (n + slice_size - 1) / slice_size;
    unsigned hw = max_threads ? max_threads : std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(hw, n_slices));

    if (n_threads <= 1) {
        for (std::size_t s = 0; s < n_slices; ++s) {
            fn(s, s * slice_size, std::min(n, (s + 1) * slice_size));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t s = next.fetch_add(1);
            if (s >= n_slices || failed.load()) return;
            try {
                fn(s, s * slice_size, std::min(n, (s + 1) * slice_size));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dpc
