#pragma once

#include <thread>
#include <vector>

namespace slabgas {

// Static block partition; workers write to disjoint indices, so results are
// identical for any thread count.
template <typename F>
void parallel_for(long n, int threads, F&& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = static_cast<int>(std::min<long>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        long lo = n * t / threads, hi = n * (t + 1) / threads;
        pool.emplace_back([lo, hi, &fn] {
            for (long i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace slabgas
