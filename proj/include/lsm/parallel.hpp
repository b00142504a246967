#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lsm {

/// Process-wide cap on worker threads (the CLI's --threads flag). Results of
/// every parallel loop in the toolkit are independent of this value.
void set_thread_count(unsigned n);
unsigned thread_count();

namespace detail {
/// True on worker threads; nested loops then run inline.
inline thread_local bool in_worker = false;
}  // namespace detail

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; each
/// index is visited exactly once, so callers writing to slot i get output
/// identical to a sequential loop. The first exception (lowest chunk) is
/// rethrown after all workers join. Loops started from inside a worker run
/// sequentially on that worker.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = detail::in_worker ? 1 : std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      detail::in_worker = true;
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace lsm
