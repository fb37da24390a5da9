// Compares the serial reference kernels against their OpenMP variants:
// cosine scoring over a household KB matrix and batch text embedding.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "homegate/kb.hpp"
#include "homegate/kernels.hpp"

namespace {

using homegate::kb::HashedNgramEmbedder;

std::vector<float> random_matrix(std::size_t n, std::size_t dim, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> m(n * dim);
  for (auto& v : m) {
    v = dist(rng);
  }
  return m;
}

void bm_dot_scores_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = homegate::kb::kDefaultEmbeddingDim;
  const std::vector<float> rows = random_matrix(n, dim, 7);
  const std::vector<float> query = random_matrix(1, dim, 11);
  std::vector<float> out(n);
  for (auto _ : state) {
    homegate::kernels::dot_scores_serial(query.data(), rows.data(), n, dim, out.data());
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}

void bm_dot_scores_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = homegate::kb::kDefaultEmbeddingDim;
  const std::vector<float> rows = random_matrix(n, dim, 7);
  const std::vector<float> query = random_matrix(1, dim, 11);
  std::vector<float> out(n);
  for (auto _ : state) {
    homegate::kernels::dot_scores_parallel(query.data(), rows.data(), n, dim, out.data());
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}

std::vector<std::string> synthetic_utterances(std::size_t n) {
  static const char* kStems[] = {"打开客厅灯", "关掉空调",     "把窗帘拉上",  "今天天气怎么样",
                                 "播放音乐",   "调高卧室温度", "扫地机器人去充电", "咱们聊聊"};
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(std::string(kStems[i % 8]) + std::to_string(i));
  }
  return out;
}

void bm_embed_many_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const HashedNgramEmbedder embedder;
  const std::vector<std::string> texts = synthetic_utterances(n);
  for (auto _ : state) {
    auto vecs = embedder.embed_many(texts, /*parallel=*/false);
    benchmark::DoNotOptimize(vecs.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}

void bm_embed_many_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const HashedNgramEmbedder embedder;
  const std::vector<std::string> texts = synthetic_utterances(n);
  for (auto _ : state) {
    auto vecs = embedder.embed_many(texts, /*parallel=*/true);
    benchmark::DoNotOptimize(vecs.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(bm_dot_scores_serial)->Arg(1000)->Arg(10000)->Arg(100000);
BENCHMARK(bm_dot_scores_parallel)->Arg(1000)->Arg(10000)->Arg(100000);
BENCHMARK(bm_embed_many_serial)->Arg(256)->Arg(2048);
BENCHMARK(bm_embed_many_parallel)->Arg(256)->Arg(2048);

BENCHMARK_MAIN();
