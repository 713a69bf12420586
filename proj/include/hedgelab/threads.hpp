#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hedgelab {

/// Worker cap: HEDGELAB_THREADS env var when set, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("HEDGELAB_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(lo, hi) over fixed-size index blocks. Block boundaries depend only
// on n, never on the worker count, so work that writes disjoint per-index
// outputs produces identical results under any scheduling. Reductions must be
// handled by the caller (per-block slots combined in block order).
inline void parallel_for_blocks(std::size_t n, std::size_t block_size,
                                const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t n_blocks = (n + block_size - 1) / block_size;
    const int workers = worker_count();
    if (workers <= 1 || n_blocks <= 1) {
        fn(0, n);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const std::size_t lo = b * block_size;
            fn(lo, std::min(lo + block_size, n));
        }
    };
    const int spawn = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(workers), n_blocks));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(spawn - 1));
    for (int i = 0; i < spawn - 1; ++i) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
}

}  // namespace hedgelab
