#pragma once

#include <cstddef>
#include <functional>

namespace deftet {

// Worker cap used by every parallel loop. 0 means hardware concurrency.
void set_thread_count(int threads);
int thread_count();

// Splits [0, n) into fixed-size chunks and runs fn(chunk_index, begin, end)
// on up to thread_count() workers. Chunk boundaries depend only on n and
// chunk_size, so per-chunk partial results merged in chunk order are
// identical for any worker count.
void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return (n + chunk_size - 1) / chunk_size;
}

}  // namespace deftet
