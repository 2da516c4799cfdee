#pragma once

#include <cstdlib>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lfk {

/// Number of worker threads: min(LFK_THREADS, hardware) when the env var is
/// set, otherwise the OpenMP default. Returns 1 in serial builds.
inline int thread_count() {
#ifdef _OPENMP
    static int cached = [] {
        int n = omp_get_max_threads();
        if (const char* env = std::getenv("LFK_THREADS")) {
            int cap = std::atoi(env);
            if (cap >= 1 && cap < n) n = cap;
        }
        return n;
    }();
    return cached;
#else
    return 1;
#endif
}

/// Parallel loop over [0, n). The body must only write outputs indexed by i
/// (fixed-order inner sums), so results are identical at any thread count.
template <class F>
inline void parallel_for(std::int64_t n, F&& body) {
#ifdef _OPENMP
    const int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < n; ++i) body(i);
#else
    for (std::int64_t i = 0; i < n; ++i) body(i);
#endif
}

/// Serial twin of parallel_for, kept as the reference path for tests and the
/// kernel benchmark.
template <class F>
inline void serial_for(std::int64_t n, F&& body) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace lfk
