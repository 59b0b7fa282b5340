#include "kmte/parallel.hpp"

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kmte {

void serial_for(std::int64_t count, const std::function<void(std::int64_t)>& body) {
  for (std::int64_t i = 0; i < count; ++i) body(i);
}

#ifdef _OPENMP

void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& body) {
  if (count <= 0) return;
  if (threads == 1) {
    serial_for(count, body);
    return;
  }
  const int pool = threads > 0 ? threads : omp_get_max_threads();
  std::exception_ptr first_error = nullptr;
  bool stop = false;
#pragma omp parallel for schedule(dynamic) num_threads(pool) shared(first_error, stop)
  for (std::int64_t i = 0; i < count; ++i) {
    bool skip;
#pragma omp atomic read
    skip = stop;
    if (skip) continue;
    try {
      body(i);
    } catch (...) {
#pragma omp critical(kmte_parallel_for_error)
      {
        if (!first_error) first_error = std::current_exception();
      }
#pragma omp atomic write
      stop = true;
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

int hardware_threads() { return omp_get_max_threads(); }

#else

void parallel_for(std::int64_t count, int /*threads*/, const std::function<void(std::int64_t)>& body) {
  serial_for(count, body);
}

int hardware_threads() { return 1; }

#endif

}  // namespace kmte
