#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace crlmix {

/// Runs body(i) for i in [0, n) on up to `threads` workers using contiguous
/// blocks. Results must not depend on the split: callers key their random
/// streams by index, never by worker. The first exception is rethrown.
template <typename Body>
void parallel_for(std::ptrdiff_t n, int threads, Body&& body) {
  if (n <= 0) {
    return;
  }
  const auto workers = static_cast<std::ptrdiff_t>(std::clamp<std::ptrdiff_t>(threads, 1, n));
  if (workers == 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_block = [&](std::ptrdiff_t w) {
    const std::ptrdiff_t begin = n * w / workers;
    const std::ptrdiff_t end = n * (w + 1) / workers;
    try {
      for (std::ptrdiff_t i = begin; i < end; ++i) {
        body(i);
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) {
        failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (std::ptrdiff_t w = 1; w < workers; ++w) {
      pool.emplace_back(run_block, w);
    }
    run_block(0);
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

} // namespace crlmix
