#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace homog {

/// Process-wide worker count used by the parallel loops (set from the CLI).
int default_workers();
void set_default_workers(int n);

/// Runs body(begin, end) over contiguous chunks of [0, n). The chunking depends only on n
/// and the worker count, and each index is processed by exactly one call, so results that
/// are written per index are deterministic. The first exception thrown by a worker is rethrown.
template <class Body>
void parallel_for(std::size_t n, const Body& body, int workers = 0) {
    if (workers <= 0) workers = default_workers();
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), std::max<std::size_t>(n, 1));
    if (w <= 1) {
        if (n > 0) body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        threads.emplace_back([&, t, b, e] {
            try {
                body(b, e);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace homog
