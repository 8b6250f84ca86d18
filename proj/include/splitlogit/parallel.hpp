#pragma once

// Loop drivers for the task-parallel kernels (CV folds, simulation
// replications). Every kernel has a serial reference that runs the same
// body in index order; results are written to per-index slots, so both
// drivers produce bitwise identical output.

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace splitlogit {

struct Execution {
  /// Worker threads for fold- and replication-level loops. 1 selects the
  /// serial reference path.
  int threads = 1;
};

template <class Body>
void serial_for(long count, Body&& body) {
  for (long i = 0; i < count; ++i) body(i);
}

template <class Body>
void omp_for(long count, int threads, Body&& body) {
  std::exception_ptr failure;
  std::mutex failure_mutex;
#ifdef _OPENMP
  // Nested regions run serially: replications already own the workers.
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1 && !omp_in_parallel())
#endif
  for (long i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

inline int available_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace splitlogit
