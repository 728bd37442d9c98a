#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace drasym {

/// Number of worker threads; 0 means std::thread::hardware_concurrency().
struct Parallelism {
  unsigned threads = 1;

  unsigned resolved() const {
    if (threads != 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

/// Runs body(begin, end) over a static partition of [0, count). The first
/// exception thrown by any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, Parallelism par, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(par.resolved(), count);
  if (workers <= 1) {
    if (count > 0) body(std::size_t{0}, count);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (tree) summation of a range. The association order depends only
/// on the length of the range.
inline double pairwise_sum(const double* values, std::size_t count) {
  if (count <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += values[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

inline constexpr std::size_t kReductionBlock = 1024;

/// Sums term(i) for i in [0, count). Terms are grouped into fixed blocks of
/// kReductionBlock, blocks are evaluated in parallel and then combined by
/// pairwise summation, so the result is bit-identical for any thread count.
template <typename Term>
double deterministic_sum(std::size_t count, Parallelism par, Term&& term) {
  const std::size_t blocks = (count + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, par, [&](std::size_t b0, std::size_t b1) {
    double buffer[kReductionBlock];
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t lo = b * kReductionBlock;
      const std::size_t hi = std::min(count, lo + kReductionBlock);
      for (std::size_t i = lo; i < hi; ++i) buffer[i - lo] = term(i);
      partial[b] = pairwise_sum(buffer, hi - lo);
    }
  });
  return pairwise_sum(partial.data(), partial.size());
}

}  // namespace drasym
