#pragma once

#include <thread>
#include <vector>

namespace mrf::detail {

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0)
        return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs fn(i) for i in [0, count) across nthreads workers with a static
/// block partition. Each index is handled exactly once, so writes to
/// disjoint slots need no synchronization and results are independent of
/// the thread count.
template <typename Fn>
void parallel_for(std::ptrdiff_t count, unsigned nthreads, Fn&& fn) {
    nthreads = resolve_threads(nthreads);
    if (count <= 0)
        return;
    if (nthreads <= 1 || count == 1) {
        for (std::ptrdiff_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    const std::ptrdiff_t workers =
        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(nthreads), count);
    const std::ptrdiff_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::ptrdiff_t w = 0; w < workers; ++w) {
        const std::ptrdiff_t lo = w * chunk;
        const std::ptrdiff_t hi = std::min(count, lo + chunk);
        if (lo >= hi)
            break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::ptrdiff_t i = lo; i < hi; ++i)
                fn(i);
        });
    }
    for (auto& t : pool)
        t.join();
}

} // namespace mrf::detail
