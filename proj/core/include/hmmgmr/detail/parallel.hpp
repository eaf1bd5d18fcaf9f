#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace hmmgmr::detail {

// Evaluates fn(0..n-1) across hardware threads and returns results in index
// order. Accumulating the ordered results serially keeps every reduction
// bit-deterministic regardless of scheduling.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(int n, Fn&& fn) {
  std::vector<Result> results(static_cast<std::size_t>(n));
  if (n <= 0) return results;

  const unsigned hw = std::thread::hardware_concurrency();
  const int workers = static_cast<int>(std::min<unsigned>(hw ? hw : 1, static_cast<unsigned>(n)));
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    return results;
  }

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        results[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  if (failed.load()) std::rethrow_exception(first_error);
  return results;
}

}  // namespace hmmgmr::detail
