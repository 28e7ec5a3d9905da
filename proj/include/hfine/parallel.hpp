#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

// Parallelism lives above the solvers: every kernel is a map over independent
// grid points / configurations / trajectories writing to preallocated slots,
// so results are identical for any thread count. serial_for is the reference
// path used by tests and the benchmark.

namespace hfine {

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename Fn>
void serial_for(std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

// threads == 1 runs the serial reference loop; threads == 0 lets the OpenMP
// runtime pick. Exceptions thrown by workers are captured and rethrown once.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
#ifdef _OPENMP
  if (threads != 1 && n > 1) {
    std::exception_ptr error;
    std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(threads > 0 ? threads : omp_get_max_threads())
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    return;
  }
#else
  (void)threads;
#endif
  serial_for(n, std::forward<Fn>(fn));
}

}  // namespace hfine
