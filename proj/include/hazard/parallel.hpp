#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace hazard {

// Thread budget: explicit request > HAZARD_CTMC_THREADS > hardware cores.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HAZARD_CTMC_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs body(i) for i in [0, count) across up to `threads` workers in fixed
// contiguous blocks. Bodies must write only to their own slot: determinism
// across thread counts rests on per-index outputs plus fixed-order reduction,
// never on execution order. First exception is rethrown after join.
inline void parallel_for(std::int64_t count, int threads,
                         const std::function<void(std::int64_t)>& body) {
  if (count <= 0) return;
  int workers = static_cast<int>(std::clamp<std::int64_t>(threads, 1, count));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::int64_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::int64_t lo = w * chunk;
    std::int64_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::int64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock{error_mutex};
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Pairwise (tree) summation; the reduction shape depends only on the length,
// so results are identical regardless of who produced the slots.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() == 0) return 0.0;
  if (xs.size() == 1) return xs[0];
  if (xs.size() == 2) return xs[0] + xs[1];
  std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace hazard
