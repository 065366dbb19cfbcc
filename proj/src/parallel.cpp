#include "vcp/parallel.hpp"

#include <atomic>
#include <thread>

namespace vcp {

namespace {
int g_threads = 0;
}

void set_thread_count(int n) { g_threads = n < 0 ? 0 : n; }

int thread_count() {
    if (g_threads > 0) return g_threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_blocks(std::size_t n, std::size_t block_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (block_size == 0) block_size = 1;
    const std::size_t nblocks = block_count(n, block_size);
    const int workers = thread_count();
    if (workers <= 1 || nblocks == 1) {
        for (std::size_t b = 0; b < nblocks; ++b) {
            const std::size_t lo = b * block_size;
            const std::size_t hi = std::min(n, lo + block_size);
            fn(b, lo, hi);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= nblocks) break;
            const std::size_t lo = b * block_size;
            const std::size_t hi = std::min(n, lo + block_size);
            fn(b, lo, hi);
        }
    };
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<std::size_t>(workers, nblocks));
    pool.reserve(spawn);
    for (int t = 1; t < spawn; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

}  // namespace vcp
