#pragma once

#include <cstdint>

namespace kel {

// Worker count used by every parallel loop in the library. Results never
// depend on it: all randomness is counter-based and reductions are serial.
void set_threads(int n);
int threads();

// Resolves --threads / KEL_THREADS / hardware concurrency, in that order.
int resolve_threads(int requested);

template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
#pragma omp parallel for schedule(static) num_threads(threads())
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace kel
