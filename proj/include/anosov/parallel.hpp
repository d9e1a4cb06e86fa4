#pragma once

// Index-parallel loop. Work items write into caller-owned slots, so the result
// never depends on the number of threads or on scheduling.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace anosov {

template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  const std::size_t workers = std::clamp<std::size_t>(threads <= 0 ? 1 : static_cast<std::size_t>(threads), 1,
                                                      std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace anosov
