#include "homegate/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace homegate::kernels {
namespace {

inline float dot_row(const float* query, const float* row, std::size_t dim) {
  float acc = 0.0f;
  for (std::size_t d = 0; d < dim; ++d) {
    acc += query[d] * row[d];
  }
  return acc;
}

}  // namespace

void dot_scores_serial(const float* query, const float* rows, std::size_t n, std::size_t dim,
                       float* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = dot_row(query, rows + i * dim, dim);
  }
}

void dot_scores_parallel(const float* query, const float* rows, std::size_t n, std::size_t dim,
                         float* out) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    out[i] = dot_row(query, rows + static_cast<std::size_t>(i) * dim, dim);
  }
}

void dot_scores(const float* query, const float* rows, std::size_t n, std::size_t dim,
                float* out) {
  if (n >= kParallelThreshold) {
    dot_scores_parallel(query, rows, n, dim, out);
  } else {
    dot_scores_serial(query, rows, n, dim, out);
  }
}

void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& fn) {
  for (std::size_t i = 0; i < n; ++i) {
    fn(i);
  }
}

void for_each_index_parallel(std::size_t n, int max_threads,
                             const std::function<void(std::size_t)>& fn) {
  if (n == 0) {
    return;
  }
  int threads = max_threads <= 0 ? omp_get_max_threads() : max_threads;
  threads = static_cast<int>(
      std::min<long long>({threads, static_cast<long long>(n), kMaxParallelThreads}));
  threads = std::max(threads, 1);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    fn(static_cast<std::size_t>(i));
  }
}

}  // namespace homegate::kernels
