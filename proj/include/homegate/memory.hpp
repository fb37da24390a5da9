#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "homegate/corpus.hpp"

namespace homegate::memory {

class MemoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WindowPolicy {
  std::int64_t max_age_s = 24 * 3600;
  std::size_t max_turns = 10;

  void validate() const;
};

// Per-household dialogue log with fixed-time-window retrieval. Turns stay
// sorted by timestamp (ties keep arrival order); the oldest are evicted
// beyond `capacity`. With a data_dir each household gets an append-only
// file that is compacted back to capacity periodically; without one the
// store is purely in-memory under the same contract.
class DialogueMemory {
 public:
  explicit DialogueMemory(std::string data_dir = "", std::size_t capacity = 1000);

  // The turn must carry a timestamp. Returns the household's stored turn
  // count after insertion and eviction.
  std::size_t append_turn(const std::string& household_id, corpus::DialogueTurn turn);

  // Turns with timestamp >= now - max_age, truncated to the most recent
  // max_turns, in chronological order. Unknown household -> empty.
  std::vector<corpus::DialogueTurn> recent_history(const std::string& household_id,
                                                   std::int64_t now,
                                                   const WindowPolicy& policy) const;

  std::size_t size(const std::string& household_id) const;
  std::vector<corpus::DialogueTurn> all_turns(const std::string& household_id) const;

 private:
  struct StoredTurn {
    corpus::DialogueTurn turn;
    std::uint64_t seq = 0;
  };

  struct Shard {
    mutable std::mutex mutex;
    std::vector<StoredTurn> turns;  // sorted by (timestamp, seq)
    std::uint64_t next_seq = 0;
    std::size_t appends_since_compaction = 0;
    bool loaded = false;
  };

  Shard& shard_for(const std::string& household_id) const;
  void load_shard_locked(Shard& shard, const std::string& household_id) const;
  std::string shard_path(const std::string& household_id) const;
  void append_record(const std::string& household_id, const StoredTurn& t) const;
  void compact_locked(Shard& shard, const std::string& household_id) const;

  std::string data_dir_;
  std::size_t capacity_;
  mutable std::shared_mutex registry_mutex_;
  mutable std::unordered_map<std::string, std::unique_ptr<Shard>> shards_;
};

}  // namespace homegate::memory
