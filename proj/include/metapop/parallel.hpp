#ifndef METAPOP_PARALLEL_HPP
#define METAPOP_PARALLEL_HPP

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace metapop {

/// Worker count: hardware concurrency capped by the METAPOP_THREADS
/// environment variable (values < 1 mean single-threaded).
inline unsigned worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("METAPOP_THREADS")) {
        const long cap = std::atol(env);
        if (cap >= 1 && static_cast<unsigned long>(cap) < hw) hw = static_cast<unsigned>(cap);
        if (cap == 1) hw = 1;
    }
    return hw;
}

/// Runs fn(r) for r in [0, reps) across workers. Each call must write only
/// to its own output slot; results are therefore identical for any worker
/// count. The first exception thrown by any replication is rethrown.
template <typename Fn>
void parallel_reps(std::uint64_t reps, Fn&& fn) {
    const unsigned workers = std::min<std::uint64_t>(worker_count(), reps ? reps : 1);
    if (workers <= 1) {
        for (std::uint64_t r = 0; r < reps; ++r) fn(r);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto body = [&] {
        for (;;) {
            const std::uint64_t r = next.fetch_add(1);
            if (r >= reps || failed.load()) return;
            try {
                fn(r);
            } catch (...) {
                bool expected = false;
                if (failed.compare_exchange_strong(expected, true)) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (failed.load() && failure) std::rethrow_exception(failure);
}

}  // namespace metapop

#endif  // METAPOP_PARALLEL_HPP
