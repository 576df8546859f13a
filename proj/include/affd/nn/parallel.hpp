#pragma once

// Batch-dimension parallelism. Work is split into contiguous chunks, one per worker slot, so
// any per-slot reduction merged in slot order is bitwise reproducible for a fixed thread count.
// Results are NOT guaranteed identical across different thread counts.

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace affd::nn {

inline std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> n{1};
  return n;
}

inline void set_num_threads(std::size_t n) { thread_setting() = std::max<std::size_t>(1, n); }
inline std::size_t num_threads() { return thread_setting(); }

inline std::size_t worker_slots(std::size_t items) {
  return std::max<std::size_t>(1, std::min(num_threads(), items));
}

/// Calls fn(item, slot) for item in [0, items) on up to `threads` workers. Slot s owns a
/// contiguous chunk of items.
template <typename Fn>
void parallel_for_n(std::size_t items, std::size_t threads, Fn&& fn) {
  const std::size_t slots = std::max<std::size_t>(1, std::min(threads, items));
  if (slots == 1) {
    for (std::size_t i = 0; i < items; ++i) fn(i, std::size_t{0});
    return;
  }
  const std::size_t chunk = (items + slots - 1) / slots;
  std::vector<std::thread> workers;
  workers.reserve(slots - 1);
  auto run = [&](std::size_t s) {
    const std::size_t lo = s * chunk, hi = std::min(items, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) fn(i, s);
  };
  for (std::size_t s = 1; s < slots; ++s) workers.emplace_back(run, s);
  run(0);
  for (auto& w : workers) w.join();
}

/// parallel_for_n with the process-wide thread setting.
template <typename Fn>
void parallel_for(std::size_t items, Fn&& fn) {
  parallel_for_n(items, num_threads(), std::forward<Fn>(fn));
}

}  // namespace affd::nn
