#include "aggronet/threads.hpp"

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <string>

namespace aggronet {

void apply_thread_cap_from_env() {
    const char* env = std::getenv("AGGRONET_THREADS");
    if (!env || !*env) return;
    int cap = 0;
    try {
        cap = std::stoi(env);
    } catch (...) {
        std::fprintf(stderr, "warning: ignoring non-numeric AGGRONET_THREADS=%s\n", env);
        return;
    }
    if (cap < 1) {
        std::fprintf(stderr, "warning: ignoring AGGRONET_THREADS=%d (must be >= 1)\n", cap);
        return;
    }
    omp_set_num_threads(cap);
}

}  // namespace aggronet
