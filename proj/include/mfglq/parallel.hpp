#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mfglq {

/// Worker cap: MFGLQ_THREADS env var, else hardware concurrency.
inline unsigned max_threads() {
    if (const char* env = std::getenv("MFGLQ_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return (unsigned)v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs f(i) for i in [0, n). Each index must write only its own slots so the
/// result is independent of the schedule.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const unsigned nt = std::min<std::size_t>(max_threads(), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(nt);
    std::exception_ptr error;
    std::mutex error_mu;
    for (unsigned w = 0; w < nt; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += nt) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace mfglq
