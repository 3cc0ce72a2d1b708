#include "fsml/exec.hpp"

#include <atomic>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fsml::exec {

namespace {
std::atomic<Mode> g_mode{
#if defined(_OPENMP)
    Mode::parallel
#else
    Mode::serial
#endif
};
}  // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }

void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

bool parallel_enabled() { return mode() == Mode::parallel; }

int thread_count() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_thread_count(int n) {
#if defined(_OPENMP)
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace fsml::exec
