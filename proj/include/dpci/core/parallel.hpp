#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace dpci {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
    static std::atomic<unsigned> cap{0};
    return cap;
}
}  // namespace detail

/// Worker count used inside ops. 0 means "not set": falls back to DPCI_THREADS,
/// then to hardware concurrency.
inline void set_num_threads(unsigned n) { detail::thread_cap().store(n); }

inline unsigned num_threads() {
    unsigned n = detail::thread_cap().load();
    if (n > 0) return n;
    if (const char* env = std::getenv("DPCI_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Static row partition over [0, n). Each index is handled by exactly one worker,
/// so results are independent of the thread count as long as fn(i) only writes
/// outputs owned by i.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t min_grain, Fn&& fn) {
    unsigned workers = num_threads();
    if (workers <= 1 || n < 2 * min_grain) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t chunks = std::min<std::size_t>(workers, (n + min_grain - 1) / min_grain);
    std::size_t per = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks - 1);
    for (std::size_t c = 1; c < chunks; ++c) {
        std::size_t lo = c * per, hi = std::min(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (std::size_t i = 0; i < std::min(n, per); ++i) fn(i);
    for (auto& t : pool) t.join();
}

}  // namespace dpci
