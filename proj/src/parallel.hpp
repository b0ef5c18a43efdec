#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace cavflow::detail {

inline int worker_count() {
    if (const char* env = std::getenv("CAVFLOW_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Splits [0, n) into fixed-size chunks and runs them on up to worker_count()
// threads.  Chunk boundaries depend only on n and grain, so results written
// per-index are identical for any thread count.
inline void parallel_for_chunks(std::size_t n, std::size_t grain,
                                const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    grain = std::max<std::size_t>(grain, 1);
    const std::size_t chunks = (n + grain - 1) / grain;
    const int threads = std::min<int>(worker_count(), static_cast<int>(chunks));
    if (threads <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= chunks) break;
                const std::size_t b = c * grain;
                const std::size_t e = std::min(n, b + grain);
                fn(b, e);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace cavflow::detail
