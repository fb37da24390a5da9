#include "homegate/kb.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "homegate/kernels.hpp"
#include "homegate/text.hpp"

namespace homegate::kb {
namespace {

constexpr std::uint64_t kNgramSeed = 0x5a17ed;  // fixed; changing it changes every vector

std::string sanitize_for_filename(std::string_view id) {
  std::string out;
  out.reserve(id.size());
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
      out.push_back(static_cast<char>(c));
    } else {
      static constexpr char kHex[] = "0123456789abcdef";
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

}  // namespace

std::vector<EmbeddingVector> TextEmbedder::embed_many(std::span<const std::string> texts,
                                                      bool parallel) const {
  std::vector<EmbeddingVector> out(texts.size());
  const auto embed_one = [&](std::size_t i) { out[i] = embed(texts[i]); };
  if (parallel) {
    kernels::for_each_index_parallel(texts.size(), 0, embed_one);
  } else {
    kernels::for_each_index_serial(texts.size(), embed_one);
  }
  return out;
}

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) {
    throw KbError("embedding dimension must be positive");
  }
}

EmbeddingVector HashedNgramEmbedder::embed(std::string_view input) const {
  EmbeddingVector vec(dim_, 0.0f);
  const std::string canon = text::canonical(input);
  if (canon.empty()) {
    return vec;
  }
  const std::vector<char32_t> cps = text::decode_utf8(canon);
  std::string gram;
  for (std::size_t n = 1; n <= 3; ++n) {
    if (cps.size() < n) {
      break;
    }
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      gram.clear();
      for (std::size_t k = 0; k < n; ++k) {
        text::append_utf8(gram, cps[i + k]);
      }
      const std::uint64_t bucket = text::fnv1a64(gram, kNgramSeed) % dim_;
      vec[bucket] += 1.0f;
    }
  }
  double norm_sq = 0.0;
  for (float v : vec) {
    norm_sq += static_cast<double>(v) * v;
  }
  const float inv = 1.0f / static_cast<float>(std::sqrt(norm_sq));
  for (float& v : vec) {
    v *= inv;
  }
  return vec;
}

float cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) {
    throw KbError("cosine of vectors with mismatched dimensions");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    return 0.0f;
  }
  return static_cast<float>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

bool hit_order_before(float sim_a, std::int64_t created_a, std::string_view id_a, float sim_b,
                      std::int64_t created_b, std::string_view id_b) {
  if (sim_a != sim_b) {
    return sim_a > sim_b;
  }
  if (created_a != created_b) {
    return created_a > created_b;
  }
  return id_a < id_b;
}

KnowledgeBase::KnowledgeBase(std::shared_ptr<const TextEmbedder> embedder, std::string data_dir,
                             std::size_t max_cases_per_household)
    : embedder_(std::move(embedder)), data_dir_(std::move(data_dir)),
      max_cases_(max_cases_per_household) {
  if (!embedder_) {
    throw KbError("knowledge base needs an embedder");
  }
  if (!data_dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(data_dir_, ec);
    if (ec) {
      throw KbError("cannot create kb directory " + data_dir_ + ": " + ec.message());
    }
  }
}

KnowledgeBase::Shard& KnowledgeBase::shard_for(const std::string& household_id) const {
  {
    std::shared_lock lock(registry_mutex_);
    const auto it = shards_.find(household_id);
    if (it != shards_.end()) {
      return *it->second;
    }
  }
  std::unique_lock lock(registry_mutex_);
  auto& slot = shards_[household_id];
  if (!slot) {
    slot = std::make_unique<Shard>();
  }
  return *slot;
}

std::string KnowledgeBase::shard_path(const std::string& household_id) const {
  return (std::filesystem::path(data_dir_) / ("kb_" + sanitize_for_filename(household_id) + ".jsonl"))
      .string();
}

void KnowledgeBase::load_shard_locked(Shard& shard, const std::string& household_id) const {
  shard.loaded = true;
  if (data_dir_.empty()) {
    return;
  }
  std::ifstream in(shard_path(household_id));
  if (!in) {
    return;  // nothing persisted yet
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      continue;
    }
    StoredCase c;
    c.case_id = j.value("case_id", "");
    c.utterance = j.value("utterance", "");
    const auto label = corpus::label_from_string(j.value("label", ""));
    if (c.case_id.empty() || c.utterance.empty() || !label) {
      continue;
    }
    c.corrected_label = *label;
    c.created_at = j.value("created_at", std::int64_t{0});
    c.canonical = text::canonical(c.utterance);
    if (duplicate_locked(shard, c.canonical, c.corrected_label)) {
      continue;
    }
    c.seq = shard.next_seq++;
    const EmbeddingVector vec = embedder_->embed(c.utterance);
    shard.matrix.insert(shard.matrix.end(), vec.begin(), vec.end());
    shard.cases.push_back(std::move(c));
  }
}

void KnowledgeBase::append_record(const std::string& household_id, const StoredCase& c) const {
  if (data_dir_.empty()) {
    return;
  }
  std::ofstream out(shard_path(household_id), std::ios::app);
  if (!out) {
    throw KbError("cannot append to kb file for household " + household_id);
  }
  nlohmann::json j{{"case_id", c.case_id},
                   {"utterance", c.utterance},
                   {"label", corpus::to_string(c.corrected_label)},
                   {"created_at", c.created_at}};
  out << j.dump() << '\n';
  if (!out) {
    throw KbError("write failed for kb file of household " + household_id);
  }
}

void KnowledgeBase::rewrite_file_locked(Shard& shard, const std::string& household_id) const {
  if (data_dir_.empty()) {
    return;
  }
  const std::string path = shard_path(household_id);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw KbError("cannot rewrite kb file for household " + household_id);
    }
    for (const auto& c : shard.cases) {
      nlohmann::json j{{"case_id", c.case_id},
                       {"utterance", c.utterance},
                       {"label", corpus::to_string(c.corrected_label)},
                       {"created_at", c.created_at}};
      out << j.dump() << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

bool KnowledgeBase::duplicate_locked(const Shard& shard, std::string_view canon,
                                     corpus::Label label) {
  for (const auto& c : shard.cases) {
    if (c.corrected_label == label && c.canonical == canon) {
      return true;
    }
  }
  return false;
}

bool KnowledgeBase::add_case(BadCase bad_case) {
  if (bad_case.household_id.empty()) {
    throw KbError("bad case without household_id");
  }
  if (text::trim(bad_case.utterance).empty()) {
    throw KbError("bad case with empty utterance");
  }
  Shard& shard = shard_for(bad_case.household_id);
  std::lock_guard lock(shard.mutex);
  if (!shard.loaded) {
    load_shard_locked(shard, bad_case.household_id);
  }

  StoredCase c;
  c.case_id = bad_case.case_id;
  c.utterance = bad_case.utterance;
  c.canonical = text::canonical(bad_case.utterance);
  c.corrected_label = bad_case.corrected_label;
  c.created_at = bad_case.created_at;
  if (duplicate_locked(shard, c.canonical, c.corrected_label)) {
    return false;
  }
  c.seq = shard.next_seq++;

  EmbeddingVector vec = bad_case.embedding.size() == embedder_->dim()
                            ? std::move(bad_case.embedding)
                            : embedder_->embed(bad_case.utterance);
  shard.matrix.insert(shard.matrix.end(), vec.begin(), vec.end());
  shard.cases.push_back(c);
  append_record(bad_case.household_id, c);

  if (shard.cases.size() > max_cases_) {
    // Evict the oldest by created_at, then arrival order.
    std::size_t victim = 0;
    for (std::size_t i = 1; i < shard.cases.size(); ++i) {
      const auto& a = shard.cases[i];
      const auto& b = shard.cases[victim];
      if (a.created_at < b.created_at || (a.created_at == b.created_at && a.seq < b.seq)) {
        victim = i;
      }
    }
    const std::size_t dim = embedder_->dim();
    shard.cases.erase(shard.cases.begin() + static_cast<std::ptrdiff_t>(victim));
    shard.matrix.erase(shard.matrix.begin() + static_cast<std::ptrdiff_t>(victim * dim),
                       shard.matrix.begin() + static_cast<std::ptrdiff_t>((victim + 1) * dim));
    rewrite_file_locked(shard, bad_case.household_id);
  }
  return true;
}

std::vector<RetrievalHit> KnowledgeBase::retrieve_top_k(const std::string& household_id,
                                                        std::string_view query,
                                                        std::size_t k) const {
  if (k == 0) {
    return {};
  }
  Shard& shard = shard_for(household_id);
  std::lock_guard lock(shard.mutex);
  if (!shard.loaded) {
    load_shard_locked(shard, household_id);
  }
  const std::size_t n = shard.cases.size();
  if (n == 0) {
    return {};
  }

  const EmbeddingVector qvec = embedder_->embed(query);
  std::vector<float> scores(n);
  kernels::dot_scores(qvec.data(), shard.matrix.data(), n, embedder_->dim(), scores.data());

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  const auto before = [&](std::size_t a, std::size_t b) {
    return hit_order_before(scores[a], shard.cases[a].created_at, shard.cases[a].case_id,
                            scores[b], shard.cases[b].created_at, shard.cases[b].case_id);
  };
  const std::size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    before);

  const std::size_t dim = embedder_->dim();
  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const std::size_t i = order[r];
    const StoredCase& c = shard.cases[i];
    RetrievalHit hit;
    hit.bad_case.case_id = c.case_id;
    hit.bad_case.household_id = household_id;
    hit.bad_case.utterance = c.utterance;
    hit.bad_case.corrected_label = c.corrected_label;
    hit.bad_case.created_at = c.created_at;
    hit.bad_case.embedding.assign(shard.matrix.begin() + static_cast<std::ptrdiff_t>(i * dim),
                                  shard.matrix.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    hit.similarity = std::clamp(scores[i], -1.0f, 1.0f);
    hits.push_back(std::move(hit));
  }
  return hits;
}

KbStats KnowledgeBase::stats(const std::string& household_id) const {
  Shard& shard = shard_for(household_id);
  std::lock_guard lock(shard.mutex);
  if (!shard.loaded) {
    load_shard_locked(shard, household_id);
  }
  KbStats s;
  for (const auto& c : shard.cases) {
    if (c.corrected_label == corpus::Label::Accept) {
      ++s.accept;
    } else {
      ++s.reject;
    }
  }
  s.total = shard.cases.size();
  return s;
}

std::size_t KnowledgeBase::size(const std::string& household_id) const {
  return stats(household_id).total;
}

}  // namespace homegate::kb
