#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "homegate/corpus.hpp"

namespace homegate::kb {

class KbError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EmbeddingVector = std::vector<float>;

inline constexpr std::size_t kDefaultEmbeddingDim = 512;

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::vector<EmbeddingVector> embed_many(std::span<const std::string> texts,
                                                  bool parallel) const;
};

// Deterministic, dependency-free embedding: NFC-normalize and trim, take
// character 1..3-grams over code points, hash each into dim buckets with a
// fixed seed, accumulate counts, L2-normalize. Empty text maps to the zero
// vector; everything else has unit norm.
class HashedNgramEmbedder final : public TextEmbedder {
 public:
  explicit HashedNgramEmbedder(std::size_t dim = kDefaultEmbeddingDim);
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

float cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct BadCase {
  std::string case_id;
  std::string household_id;
  std::string utterance;
  corpus::Label corrected_label = corpus::Label::Accept;
  EmbeddingVector embedding;  // empty on input lets the KB compute it
  std::int64_t created_at = 0;
};

struct RetrievalHit {
  BadCase bad_case;
  float similarity = 0.0f;  // cosine, clamped to [-1, 1]
};

struct KbStats {
  std::size_t accept = 0;
  std::size_t reject = 0;
  std::size_t total = 0;
};

// Deterministic ordering used by retrieval and mirrored by the test oracle:
// similarity desc, created_at desc, case_id asc.
bool hit_order_before(float sim_a, std::int64_t created_a, std::string_view id_a, float sim_b,
                      std::int64_t created_b, std::string_view id_b);

// Per-household misjudgment store. Writes to one household serialize; reads
// see a consistent snapshot; distinct households proceed independently.
// When data_dir is non-empty each household gets an append-only record
// file (embeddings are never written; they are recomputed on load).
class KnowledgeBase {
 public:
  explicit KnowledgeBase(std::shared_ptr<const TextEmbedder> embedder,
                         std::string data_dir = "",
                         std::size_t max_cases_per_household = 10000);

  // Returns false on a duplicate (same household, same canonical utterance,
  // same corrected label). Oldest cases are evicted beyond the per-household
  // cap.
  bool add_case(BadCase bad_case);

  // Exhaustive cosine scan restricted to the household; length is
  // min(k, household size). Unknown household yields an empty list.
  std::vector<RetrievalHit> retrieve_top_k(const std::string& household_id, std::string_view query,
                                           std::size_t k = 3) const;

  KbStats stats(const std::string& household_id) const;
  std::size_t size(const std::string& household_id) const;

  const TextEmbedder& embedder() const { return *embedder_; }

 private:
  struct StoredCase {
    std::string case_id;
    std::string utterance;
    std::string canonical;
    corpus::Label corrected_label;
    std::int64_t created_at = 0;
    std::uint64_t seq = 0;
  };

  struct Shard {
    mutable std::mutex mutex;
    std::vector<StoredCase> cases;
    std::vector<float> matrix;  // row-major, cases.size() x dim
    std::uint64_t next_seq = 0;
    bool loaded = false;
  };

  Shard& shard_for(const std::string& household_id) const;
  void load_shard_locked(Shard& shard, const std::string& household_id) const;
  std::string shard_path(const std::string& household_id) const;
  void append_record(const std::string& household_id, const StoredCase& c) const;
  void rewrite_file_locked(Shard& shard, const std::string& household_id) const;
  static bool duplicate_locked(const Shard& shard, std::string_view canon, corpus::Label label);

  std::shared_ptr<const TextEmbedder> embedder_;
  std::string data_dir_;
  std::size_t max_cases_;
  mutable std::shared_mutex registry_mutex_;
  mutable std::unordered_map<std::string, std::unique_ptr<Shard>> shards_;
};

}  // namespace homegate::kb
