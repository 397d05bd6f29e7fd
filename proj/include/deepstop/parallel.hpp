#pragma once

#include <algorithm>
#include <cstddef>
#include <mutex>
#include <thread>
#include <vector>

namespace deepstop {

inline constexpr std::size_t kDefaultChunk = 8192;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

/// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n).
/// Chunk boundaries do not depend on the worker count, so chunk-local
/// accumulation combined in chunk order is schedule-independent.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, std::size_t chunk, Fn&& fn) {
  if (n == 0) return;
  const std::size_t nchunks = chunk_count(n, chunk);
  if (threads <= 1 || nchunks == 1) {
    for (std::size_t c = 0; c < nchunks; ++c) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::mutex mtx;
  std::size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t c;
      {
        std::lock_guard<std::mutex> lock(mtx);
        if (next >= nchunks) return;
        c = next++;
      }
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  const int nw = static_cast<int>(std::min<std::size_t>(threads, nchunks));
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace deepstop
