#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ledpose {

inline int default_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(i, worker_id) for i in [0, count); worker ids are dense in
// [0, workers). Results must not depend on the worker count; callers that
// accumulate must do so per-index and reduce in order.
template <typename Fn>
void parallel_for_wid(long count, int workers, Fn&& fn) {
  if (count <= 0) return;
  workers = std::max(1, static_cast<int>(std::min<long>(workers, count)));
  if (workers == 1) {
    for (long i = 0; i < count; ++i) fn(i, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex err_mutex;
  long chunk = (count + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    long begin = t * chunk;
    long end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end, t] {
      try {
        for (long i = begin; i < end; ++i) fn(i, t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Runs fn(i) for i in [0, count); see parallel_for_wid.
template <typename Fn>
void parallel_for(long count, int workers, Fn&& fn) {
  parallel_for_wid(count, workers, [&fn](long i, int) { fn(i); });
}

}  // namespace ledpose
