#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace diatomic {

/// Thread cap read from DIATOMIC_DP_THREADS; 1 (the deterministic reference
/// path) when unset or unparsable.
inline std::size_t threads_from_env() {
    const char* raw = std::getenv("DIATOMIC_DP_THREADS");
    if (raw == nullptr) return 1;
    try {
        const long parsed = std::stol(raw);
        return parsed > 0 ? static_cast<std::size_t>(parsed) : 1;
    } catch (...) {
        return 1;
    }
}

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write only to slot i so results do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) body(i);
        });
    }
}

} // namespace diatomic
