#pragma once

#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace occkit {

// Threads requested via CLI flag or the OCCKIT_THREADS environment variable.
// requested <= 0 falls back to the environment, then to 1.
inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OCCKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// Runs fn(i) for every i in [0, n). fn must write only to slot i of any
// shared output, so the result never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Deterministic parallel reduction. The input [0, n) is cut into fixed-size
// chunks whose boundaries depend only on n and chunk_size, never on the
// thread count. Chunk partials are computed in parallel but merged strictly
// in ascending chunk order, so the merged result is bit-identical to a
// sequential run for any number of workers.
//
// make_partial(begin, end) -> Partial computes one chunk sequentially.
// merge(Partial&&) is called once per chunk, in chunk order.
template <typename Partial, typename MakeFn, typename MergeFn>
void chunked_reduce(std::size_t n, std::size_t chunk_size, int threads,
                    MakeFn&& make_partial, MergeFn&& merge) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t nchunks = (n + chunk_size - 1) / chunk_size;
  if (threads <= 1 || nchunks == 1) {
    for (std::size_t c = 0; c < nchunks; ++c) {
      const std::size_t begin = c * chunk_size;
      const std::size_t end = std::min(n, begin + chunk_size);
      merge(make_partial(begin, end));
    }
    return;
  }
  // Waves bound the number of partials held in memory to the worker count.
  const std::size_t wave = static_cast<std::size_t>(threads);
  std::vector<Partial> partials;
  for (std::size_t base = 0; base < nchunks; base += wave) {
    const std::size_t count = std::min(wave, nchunks - base);
    partials.clear();
    partials.resize(count);
    parallel_for(count, threads, [&](std::size_t k) {
      const std::size_t begin = (base + k) * chunk_size;
      const std::size_t end = std::min(n, begin + chunk_size);
      partials[k] = make_partial(begin, end);
    });
    for (std::size_t k = 0; k < count; ++k) merge(std::move(partials[k]));
  }
}

}  // namespace occkit
