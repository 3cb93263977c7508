#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace phidep {

// SplitMix64 step; used to derive independent per-chunk RNG seeds from a root
// seed so results do not depend on the number of worker threads.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t chunk_seed(std::uint64_t root_seed, std::uint64_t chunk_index) {
  return splitmix64(root_seed + 0x632be59bd9b4e019ULL * (chunk_index + 1));
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(chunk_index) for chunk_index in [0, n_chunks) on up to `threads`
// workers. Each chunk writes only its own slot, so reductions done afterwards
// in chunk order are bit-identical for any thread count.
template <class Body>
void parallel_chunks(std::uint64_t n_chunks, int threads, Body&& body) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n_chunks <= 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) body(c);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::uint64_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        body(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_chunks);  // stop handing out further chunks
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int n_workers = static_cast<int>(std::min<std::uint64_t>(threads, n_chunks));
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace phidep
