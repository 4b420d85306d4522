#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace streaklab::detail {

// Runs body(chunk_index, begin, end) for every chunk of [0, n). Chunk
// boundaries depend only on (n, chunk_size), never on the worker count, so
// per-chunk results are stable however the chunks get scheduled.
template <typename Body>
void for_chunks(std::uint64_t n, std::uint64_t chunk_size, int threads, Body&& body) {
  if (n == 0) return;
  const std::uint64_t n_chunks = (n + chunk_size - 1) / chunk_size;
  if (threads <= 1 || n_chunks == 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c)
      body(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= n_chunks || failed.load(std::memory_order_relaxed)) return;
      try {
        body(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };

  const int n_workers = static_cast<int>(std::min<std::uint64_t>(threads, n_chunks));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

} // namespace streaklab::detail
