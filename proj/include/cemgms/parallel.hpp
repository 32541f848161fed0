#pragma once

#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cemgms {

inline void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs fn(i) for i in [0, n). Iterations must write to disjoint slots.
/// If several iterations throw, the exception of the lowest index wins.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
  std::exception_ptr error;
  int error_index = std::numeric_limits<int>::max();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(cemgms_parallel_for)
#endif
      {
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace cemgms
