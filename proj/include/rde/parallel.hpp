#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rde {

// Caps the OpenMP worker count for every parallel loop; 0 keeps the runtime
// default. Results never depend on this value: parallel loops write disjoint
// slots and reductions run in fixed index order afterwards.
inline void set_thread_cap(int n) {
#ifdef _OPENMP
    if (n > 0)
        omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace rde
