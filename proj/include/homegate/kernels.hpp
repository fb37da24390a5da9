#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace homegate::kernels {

// out[i] = dot(query, rows + i*dim). Rows hold unit-norm embeddings, so the
// dot product is the cosine similarity. The serial variant is the reference;
// the parallel one must produce bit-identical results (each out[i] is an
// independent left-to-right accumulation).
void dot_scores_serial(const float* query, const float* rows, std::size_t n, std::size_t dim,
                       float* out);
void dot_scores_parallel(const float* query, const float* rows, std::size_t n, std::size_t dim,
                         float* out);

// Picks the parallel variant above kParallelThreshold rows.
void dot_scores(const float* query, const float* rows, std::size_t n, std::size_t dim, float* out);

inline constexpr std::size_t kParallelThreshold = 2048;

// Applies fn to every index in [0, n); the parallel variant uses a dynamic
// OpenMP schedule with at most max_threads threads (<= 0 means the OpenMP
// default; always clamped to n and kMaxParallelThreads). fn must be safe
// to run concurrently for distinct indices.
inline constexpr long long kMaxParallelThreads = 256;

void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& fn);
void for_each_index_parallel(std::size_t n, int max_threads,
                             const std::function<void(std::size_t)>& fn);

}  // namespace homegate::kernels
