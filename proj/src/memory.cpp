#include "homegate/memory.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "homegate/text.hpp"

namespace homegate::memory {
namespace {

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

nlohmann::json turn_record(const corpus::DialogueTurn& turn) {
  return nlohmann::json{{"speaker", corpus::to_string(turn.speaker)},
                        {"text", turn.text},
                        {"ts", turn.timestamp.value_or(0)}};
}

}  // namespace

void WindowPolicy::validate() const {
  if (max_age_s <= 0) {
    throw MemoryError("window max_age must be positive");
  }
  if (max_turns == 0) {
    throw MemoryError("window max_turns must be at least 1");
  }
}

DialogueMemory::DialogueMemory(std::string data_dir, std::size_t capacity)
    : data_dir_(std::move(data_dir)), capacity_(capacity) {
  if (capacity_ == 0) {
    throw MemoryError("memory capacity must be positive");
  }
  if (!data_dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(data_dir_, ec);
    if (ec) {
      throw MemoryError("cannot create memory directory " + data_dir_ + ": " + ec.message());
    }
  }
}

DialogueMemory::Shard& DialogueMemory::shard_for(const std::string& household_id) const {
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

std::string DialogueMemory::shard_path(const std::string& household_id) const {
  return (std::filesystem::path(data_dir_) /
          ("mem_" + sanitize_for_filename(household_id) + ".jsonl"))
      .string();
}

void DialogueMemory::load_shard_locked(Shard& shard, const std::string& household_id) const {
  shard.loaded = true;
  if (data_dir_.empty()) {
    return;
  }
  std::ifstream in(shard_path(household_id));
  if (!in) {
    return;
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
    const auto speaker = corpus::speaker_from_string(j.value("speaker", ""));
    const std::string turn_text = j.value("text", "");
    if (!speaker || text::trim(turn_text).empty() || !j.contains("ts")) {
      continue;
    }
    StoredTurn t;
    t.turn.speaker = *speaker;
    t.turn.text = turn_text;
    t.turn.timestamp = j["ts"].get<std::int64_t>();
    t.seq = shard.next_seq++;
    shard.turns.push_back(std::move(t));
  }
  std::stable_sort(shard.turns.begin(), shard.turns.end(), [](const auto& a, const auto& b) {
    return *a.turn.timestamp < *b.turn.timestamp;
  });
  if (shard.turns.size() > capacity_) {
    shard.turns.erase(shard.turns.begin(),
                      shard.turns.begin() +
                          static_cast<std::ptrdiff_t>(shard.turns.size() - capacity_));
  }
}

void DialogueMemory::append_record(const std::string& household_id, const StoredTurn& t) const {
  if (data_dir_.empty()) {
    return;
  }
  std::ofstream out(shard_path(household_id), std::ios::app);
  if (!out) {
    throw MemoryError("cannot append to memory file for household " + household_id);
  }
  out << turn_record(t.turn).dump() << '\n';
  if (!out) {
    throw MemoryError("write failed for memory file of household " + household_id);
  }
}

void DialogueMemory::compact_locked(Shard& shard, const std::string& household_id) const {
  if (data_dir_.empty()) {
    return;
  }
  const std::string path = shard_path(household_id);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw MemoryError("cannot compact memory file for household " + household_id);
    }
    for (const auto& t : shard.turns) {
      out << turn_record(t.turn).dump() << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
  shard.appends_since_compaction = 0;
}

std::size_t DialogueMemory::append_turn(const std::string& household_id,
                                        corpus::DialogueTurn turn) {
  if (!turn.timestamp) {
    throw MemoryError("stored turns need a timestamp");
  }
  if (text::trim(turn.text).empty()) {
    throw MemoryError("stored turns need non-empty text");
  }
  Shard& shard = shard_for(household_id);
  std::lock_guard lock(shard.mutex);
  if (!shard.loaded) {
    load_shard_locked(shard, household_id);
  }

  StoredTurn t;
  t.turn = std::move(turn);
  t.seq = shard.next_seq++;
  append_record(household_id, t);

  // Insert keeping (timestamp, seq) order; late arrivals slot in place.
  auto it = std::upper_bound(shard.turns.begin(), shard.turns.end(), t,
                             [](const StoredTurn& a, const StoredTurn& b) {
                               return *a.turn.timestamp < *b.turn.timestamp;
                             });
  shard.turns.insert(it, std::move(t));
  ++shard.appends_since_compaction;

  if (shard.turns.size() > capacity_) {
    shard.turns.erase(shard.turns.begin(),
                      shard.turns.begin() +
                          static_cast<std::ptrdiff_t>(shard.turns.size() - capacity_));
  }
  if (shard.appends_since_compaction > capacity_) {
    compact_locked(shard, household_id);
  }
  return shard.turns.size();
}

std::vector<corpus::DialogueTurn> DialogueMemory::recent_history(const std::string& household_id,
                                                                 std::int64_t now,
                                                                 const WindowPolicy& policy) const {
  policy.validate();
  Shard& shard = shard_for(household_id);
  std::lock_guard lock(shard.mutex);
  if (!shard.loaded) {
    load_shard_locked(shard, household_id);
  }
  const std::int64_t cutoff = now - policy.max_age_s;
  std::vector<corpus::DialogueTurn> in_window;
  for (const auto& t : shard.turns) {
    if (*t.turn.timestamp >= cutoff) {
      in_window.push_back(t.turn);
    }
  }
  if (in_window.size() > policy.max_turns) {
    in_window.erase(in_window.begin(),
                    in_window.begin() +
                        static_cast<std::ptrdiff_t>(in_window.size() - policy.max_turns));
  }
  return in_window;
}

std::size_t DialogueMemory::size(const std::string& household_id) const {
  Shard& shard = shard_for(household_id);
  std::lock_guard lock(shard.mutex);
  if (!shard.loaded) {
    load_shard_locked(shard, household_id);
  }
  return shard.turns.size();
}

std::vector<corpus::DialogueTurn> DialogueMemory::all_turns(const std::string& household_id) const {
  Shard& shard = shard_for(household_id);
  std::lock_guard lock(shard.mutex);
  if (!shard.loaded) {
    load_shard_locked(shard, household_id);
  }
  std::vector<corpus::DialogueTurn> out;
  out.reserve(shard.turns.size());
  for (const auto& t : shard.turns) {
    out.push_back(t.turn);
  }
  return out;
}

}  // namespace homegate::memory
