#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mkan {

/// Environment variable that pins the worker thread count.
inline constexpr const char* kThreadsEnv = "MKAN_NUM_THREADS";

/// Samples per work chunk. Fixed so that reductions over chunks happen in the
/// same order whatever the thread count.
inline constexpr std::size_t kChunkSize = 256;

inline int worker_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_worker_threads(int n) {
  if (n < 1) throw std::invalid_argument("thread count must be >= 1");
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

/// Applies MKAN_NUM_THREADS if set. Returns the resulting thread count.
inline int configure_threads_from_env() {
  if (const char* v = std::getenv(kThreadsEnv); v && *v) {
    int n = 0;
    try {
      n = std::stoi(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(kThreadsEnv) + " must be a positive integer");
    }
    set_worker_threads(n);
  }
  return worker_threads();
}

inline std::size_t chunk_count(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

/// Runs fn(chunk, begin, end) for each fixed-size chunk of [0, n). Chunks may
/// run on different threads; fn must only write chunk-private state.
template <class Fn>
void for_each_chunk(std::size_t n, Fn&& fn) {
  const long chunks = static_cast<long>(chunk_count(n));
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (long c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunkSize;
    fn(static_cast<std::size_t>(c), begin, std::min(n, begin + kChunkSize));
  }
}

}  // namespace mkan
