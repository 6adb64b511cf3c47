#pragma once
// Chunked parallel-for with a fixed partition, so reductions done in chunk
// order are independent of thread scheduling.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace rlst {

// fn(chunk_index, begin, end); chunk boundaries depend only on (n, threads).
template <typename F>
void parallel_chunks(int64_t n, int threads, F&& fn) {
  if (n <= 0) return;
  const int64_t chunk = (n + threads - 1) / threads;
  if (threads <= 1 || n <= chunk) {
    fn(0, int64_t(0), n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
  for (int k = 0; k < threads; ++k) {
    const int64_t b = int64_t(k) * chunk;
    const int64_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, &errors, k, b, e] {
      try {
        fn(k, b, e);
      } catch (...) {
        errors[size_t(k)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace rlst
