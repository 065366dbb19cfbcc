#ifndef VCP_PARALLEL_HPP
#define VCP_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace vcp {

// Process-wide worker count. 0 selects std::thread::hardware_concurrency().
void set_thread_count(int n);
int thread_count();

// Splits [0,n) into fixed-size blocks and runs fn(block_index, begin, end) for
// each. Block boundaries depend only on n and block_size, never on the worker
// count, so per-block results are reproducible across thread settings; callers
// that reduce must do so in block order.
void parallel_blocks(std::size_t n, std::size_t block_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t block_count(std::size_t n, std::size_t block_size) {
    return (n + block_size - 1) / block_size;
}

}  // namespace vcp

#endif
