#pragma once

#include <cstddef>
#include <functional>

namespace mfgcn {

/// Number of worker threads used by parallel_chunks. Defaults to 1.
std::size_t worker_count();
void set_worker_count(std::size_t n);

/// Fixed chunk size used for path-parallel work. Chunk boundaries never
/// depend on the worker count, so per-chunk partial results reduced in chunk
/// order are bitwise identical for any number of workers.
inline constexpr std::size_t kChunkSize = 512;

inline std::size_t chunk_count(std::size_t n_items, std::size_t chunk = kChunkSize) {
    return (n_items + chunk - 1) / chunk;
}

/// Runs body(chunk_index, begin, end) over [0, n_items) split into fixed-size
/// chunks. Chunks are handed out dynamically to the worker pool.
void parallel_chunks(std::size_t n_items,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                     std::size_t chunk = kChunkSize);

}  // namespace mfgcn
