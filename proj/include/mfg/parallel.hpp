#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace mfg {

/// Runs fn(begin, end) over a fixed chunking of [0, n) that does not depend
/// on the thread count, so results written to disjoint slots are identical
/// for any `threads`.
inline void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (threads <= 1) {
        fn(0, n);
        return;
    }
    const std::int64_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int k = 0; k < threads; ++k) {
        const std::int64_t lo = k * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

/// SplitMix64; used to derive independent per-path RNG streams from
/// (seed, stream id) so that simulation output is schedule-independent.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace mfg
