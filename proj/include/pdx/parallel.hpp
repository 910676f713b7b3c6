#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pdx {

/// Concurrency budget for independent evaluations (quadrature nodes, sweeps).
struct Exec {
  unsigned threads = 1;
};

/// Evaluates fn(i) for i in [0, count) into a vector indexed by i.
/// Work is split into contiguous blocks; results never depend on the thread
/// count, and callers reduce the returned vector in index order.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, const Exec& exec, Fn&& fn) {
  std::vector<T> out(count);
  const std::size_t workers = std::clamp<std::size_t>(exec.threads, 1, std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * block;
        const std::size_t hi = std::min(count, lo + block);
        for (std::size_t i = lo; i < hi; ++i) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace pdx
