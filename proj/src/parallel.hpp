#pragma once
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace polo {

// Runs fn(begin, end, worker) over [0, n) split into one contiguous chunk per
// worker. threads <= 1 runs inline on the calling thread. The first exception
// thrown by a worker is rethrown after all workers join.
template <class Fn>
void parallel_chunks(int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    fn(int64_t{0}, n, 0);
    return;
  }
  int workers = static_cast<int>(std::min<int64_t>(threads, n));
  int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    int64_t begin = w * chunk;
    int64_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end, w] {
      try {
        if (begin < end) fn(begin, end, w);
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

}  // namespace polo
