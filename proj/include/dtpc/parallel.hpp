#pragma once

#include <thread>
#include <vector>

namespace dtpc {

// Runs fn(chunk_index, begin, end) over [0, total) split into `threads`
// contiguous chunks. Chunk results must be merged by the caller in chunk
// order; per-item work must derive any randomness from the global item index.
template <typename Fn>
void parallel_chunks(long total, int threads, Fn&& fn) {
  if (threads <= 1 || total < 2) {
    fn(0, 0L, total);
    return;
  }
  const int n = std::min<long>(threads, total);
  std::vector<std::thread> pool;
  pool.reserve(n);
  const long per = (total + n - 1) / n;
  for (int c = 0; c < n; ++c) {
    const long lo = c * per;
    const long hi = std::min(total, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([&fn, c, lo, hi] { fn(c, lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace dtpc
