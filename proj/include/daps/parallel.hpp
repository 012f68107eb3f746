#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace daps {

/// Execution policy for the data-parallel kernels. Both paths process the
/// same counter-seeded chunks and reduce them in a fixed order, so results
/// are bit-identical; the serial path is the reference implementation the
/// tests compare against and the benchmark baselines.
enum class Exec { serial, parallel };

/// Run fn(0..n-1), parallel over OpenMP threads when requested. Exceptions
/// are captured inside the parallel region and rethrown afterwards.
inline void run_chunks(std::size_t n, Exec exec, const std::function<void(std::size_t)>& fn) {
  if (exec == Exec::parallel) {
    std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(n); ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(daps_run_chunks_error)
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

}  // namespace daps
